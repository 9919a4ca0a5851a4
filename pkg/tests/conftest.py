from hypothesis import settings

# numba kernels compile or load from cache on first call; wall-clock deadlines
# would flag that one-off cost
settings.register_profile("kmap", deadline=None)
settings.load_profile("kmap")
