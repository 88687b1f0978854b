import logging

import pytest

from idchain import api as api_mod
from idchain import store as store_mod
from idchain.chain import node as chain
from idchain.chain.rpc import build_rpc_app
from idchain.gateway import GatewayClient, GatewayConfig
from idchain.gateway import serve as gateway_serve
from idchain.serving import ServerThread

logging.getLogger("idchain").setLevel(logging.ERROR)

SEED = b"test-seed"


class Clock:
    """Settable test clock (epoch seconds)."""

    def __init__(self, start=1_700_000_000):
        self.now = start

    def __call__(self):
        return self.now

    def advance(self, seconds):
        self.now += seconds


class FakeChainResult:
    def __init__(self, ok=True, transaction_hash="0x" + "ab" * 32,
                 block_number=1, gas_used=23172, error=""):
        self.ok = ok
        self.transaction_hash = transaction_hash
        self.block_number = block_number
        self.gas_used = gas_used
        self.error = error


class FakeGateway:
    """Stand-in for GatewayClient in API tests that don't need a chain."""

    def __init__(self):
        self.calls = []
        self.next_result = FakeChainResult()
        self.raise_on_register = None
        self.healthy = True

    def register_user(self, user_id, email, cpf):
        self.calls.append((user_id, email, cpf))
        if self.raise_on_register:
            raise self.raise_on_register
        return self.next_result

    def health(self):
        class Reply:
            chain_ok = self.healthy
            head = 0
        if not self.healthy:
            raise ConnectionError("gateway down")
        return Reply()


@pytest.fixture
def clock():
    return Clock()


@pytest.fixture
def fake_gateway():
    return FakeGateway()


@pytest.fixture
def api_client(clock, fake_gateway):
    from fastapi.testclient import TestClient
    store = store_mod.MemoryStore()
    config = api_mod.ApiConfig(jwt_secret=b"test-secret")
    app = api_mod.create_app(config, store, fake_gateway, clock=clock)
    client = TestClient(app)
    client.store = store
    client.clock = clock
    client.gateway = fake_gateway
    return client


class ChainStack:
    """chain-node RPC server + gateway gRPC server + client, all local."""

    def __init__(self, clock, seed=SEED, n_accounts=3):
        self.node = chain.ChainNode(seed=seed, n_accounts=n_accounts,
                                    clock=clock)
        self.rpc_server = ServerThread(build_rpc_app(self.node)).start()
        config = GatewayConfig(chain_rpc_url=self.rpc_server.url,
                               admin_private_key=chain.derive_private_key(seed, 0))
        self.grpc_server, port = gateway_serve(config, "127.0.0.1:0")
        self.gateway_addr = f"127.0.0.1:{port}"
        self.gateway = GatewayClient(self.gateway_addr)

    def stop(self):
        self.gateway.close()
        self.grpc_server.stop(None)
        self.rpc_server.stop()


@pytest.fixture
def chain_stack(clock):
    stack = ChainStack(clock)
    yield stack
    stack.stop()


def register_payload(i=0):
    """Distinct valid registration bodies; CPFs carry valid check digits."""
    cpfs = ["52998224725", "16899535009", "11144477735", "93541134780",
            "28625587887", "73489925440", "04370944058", "71428793860"]
    return {
        "name": f"User {i}",
        "cpf": cpfs[i % len(cpfs)],
        "email": f"user{i}@example.com",
        "password": f"hunter2-{i:04d}",
    }
