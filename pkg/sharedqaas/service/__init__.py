from .config import DEFAULT_PORT, GatewayConfig, load_gateway_config
from .gateway import BatchExecutor, GatewayCounters, QueryBatcher, create_reply, jsonable
from .server import GatewayServer, gateway_serve, open_backend, parse_request

__all__ = [
    "DEFAULT_PORT",
    "BatchExecutor",
    "GatewayConfig",
    "GatewayCounters",
    "GatewayServer",
    "QueryBatcher",
    "create_reply",
    "gateway_serve",
    "jsonable",
    "load_gateway_config",
    "open_backend",
    "parse_request",
]
