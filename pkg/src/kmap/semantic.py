"""Semantic type labels.

Types are plain strings. Parsing is case-insensitive and returns the
canonical spelling; combined types produced by merging are members joined
with ``+`` (``Audio+Exe``).
"""

from .errors import UnknownType

AUDIO, DOC, EXE, PIC, TXT, VID = "Audio", "Doc", "Exe", "Pic", "Txt", "Vid"
BUILTIN_TYPES = (AUDIO, DOC, EXE, PIC, TXT, VID)

# labels of the synthetic surrogate corpus; never reuse the real-data names
SYNTHETIC_KINDS = ("random_bytes", "repeated_pattern", "markov_text", "pcm_sine_mix",
                   "structured_binary")

_ALIASES = {
    "word": DOC, "msword": DOC, "document": DOC, "executable": EXE, "image": PIC,
    "picture": PIC, "text": TXT, "ascii": TXT, "video": VID,
}


def known_types(extra=()):
    return BUILTIN_TYPES + SYNTHETIC_KINDS + tuple(extra)


def parse_type(name, extra=()):
    """Canonical spelling of ``name`` or UnknownType."""
    text = str(name).strip()
    if "+" in text:
        return "+".join(parse_type(part, extra) for part in text.split("+"))
    lowered = text.lower()
    for t in known_types(extra):
        if t.lower() == lowered:
            return t
    if lowered in _ALIASES:
        return _ALIASES[lowered]
    raise UnknownType(f"unknown semantic type {name!r}; known: {', '.join(known_types(extra))}")
