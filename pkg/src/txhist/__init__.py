"""Bitcoin transaction history summaries and service-category classification."""

from .model import (
    FEATURE_NAMES,
    Category,
    FeatureVector,
    Moments,
    RateTable,
    RoleKind,
    Transaction,
    TransactionHistory,
    TxInput,
    TxOutput,
    TxRole,
)

__version__ = "0.1.0"

__all__ = [
    "FEATURE_NAMES",
    "Category",
    "FeatureVector",
    "Moments",
    "RateTable",
    "RoleKind",
    "Transaction",
    "TransactionHistory",
    "TxInput",
    "TxOutput",
    "TxRole",
]
