from hypothesis import settings

# fixed example sequence so test logs are reproducible
settings.register_profile("repro", derandomize=True, print_blob=True)
settings.load_profile("repro")
