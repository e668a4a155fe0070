from .plot_sweep import SchemaError, aggregate, load_rows, plot_sweep, summary_cells

__version__ = "0.1.0"
