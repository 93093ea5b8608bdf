"""Pseudo-relevance feedback from federated news verticals."""
