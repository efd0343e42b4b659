"""Anonymity analysis of source-routed payment channel networks.

Simulates multi-hop payments under the LND, c-Lightning and Eclair route
selection rules and computes the sender and recipient anonymity sets an
intermediary can derive from what it forwards.
"""

from .attack import AttackConfig, AnonymityResult, attack, brute_force_anonymity, collude
from .payment import HopObservation, Payment, execute_payment
from .routing import CostParams, Route, annotate_route, find_k_routes, find_route
from .snapshot import Client, NetworkGraph, load_snapshot

__version__ = "0.1.0"
