"""Canonical fault records, their life cycle, format adapters and metrics.

Submodules are imported explicitly (``iofm.faultmodel.records`` and so on)
because the topology layer depends on :mod:`.metrics` alone.
"""
