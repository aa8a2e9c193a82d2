"""Drug-drug interaction prediction with learned knowledge subgraphs."""

__version__ = "0.1.0"
