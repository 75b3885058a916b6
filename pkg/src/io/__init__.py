"""Input/Output utilities for panel data, configuration and reports."""

from src.io.config_loader import load_config
from src.io.panel_csv import export_csv, ingest_csv

__all__ = ['load_config', 'ingest_csv', 'export_csv']
