"""CES co-occurrence network toolkit - Main Package"""

__version__ = "0.1.0"
