"""meshhub: a desk-scale federated data-mesh hub.

Aggregated study metadata, persistent identifiers, pass-through data
access across three repository capability tiers, investigator-driven
study registration, and faceted discovery, plus a simulated mesh of mock
repositories for end-to-end exercise.
"""

__version__ = "0.1.0"
