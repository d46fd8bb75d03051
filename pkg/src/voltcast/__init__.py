"""Long-term load forecasting with an ARIMA mean equation and GARCH errors."""

__version__ = "0.1.0"
