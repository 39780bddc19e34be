"""Agent-based negotiation and escalation in a tiered supply network."""

__version__ = "0.1.0"
