# Sentinel file for `pytest` (to allow testing of pulseforge)
