"""
Fed-DART: a server-centric federated learning runtime (server, client workers and a non-blocking workflow library)
together with FACT, a toolkit for federated aggregation and clustering built on top of it.
"""

__version__ = "1.0.0"
