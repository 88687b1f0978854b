from .service import GatewayClient, GatewayConfig, serve  # noqa: F401
