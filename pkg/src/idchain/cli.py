"""Operator CLI: run the services, inspect the chain, verify integrity,
tail audit logs, and re-anchor users whose chain registration failed."""

from __future__ import annotations

import json
import logging
import os
import sys

import click

from . import api as api_mod
from . import store as store_mod
from .chain import node as chain
from .chain.rpc import RpcClient, RpcError, ChainUnreachable, build_rpc_app
from .gateway import GatewayClient, GatewayConfig, serve as gateway_serve

log = logging.getLogger("idchain.cli")


def _split_addr(addr: str) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    return host or "127.0.0.1", int(port)


class Settings:
    """Env vars, overridable by a --config JSON file."""

    def __init__(self, config_path: str | None):
        self.overrides = {}
        if config_path:
            with open(config_path) as f:
                self.overrides = json.load(f)

    def get(self, key: str, default: str | None = None) -> str | None:
        if key in self.overrides:
            return str(self.overrides[key])
        return os.environ.get(key, default)

    def require(self, key: str) -> str:
        value = self.get(key)
        if not value:
            raise click.ClickException(f"{key} is not configured")
        return value

    def admin_key(self) -> bytes:
        hex_key = self.get("CHAIN_ADMIN_KEY")
        if hex_key:
            return bytes.fromhex(hex_key.removeprefix("0x"))
        seed = self.get("CHAIN_SEED", "idchain-dev").encode()
        return chain.derive_private_key(seed, 0)

    def open_store(self):
        config = store_mod.StoreConfig(uri=self.require("STORE_URI"))
        return store_mod.connect(config)


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="JSON config file overriding env vars.")
@click.pass_context
def main(ctx, config_path):
    logging.basicConfig(level=logging.INFO,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    ctx.obj = Settings(config_path)


@main.command("serve-chain")
@click.option("--bind", default=None, help="host:port (default 0.0.0.0:8545)")
@click.option("--seed", default=None)
@click.option("--accounts", default=chain.DEFAULT_N_ACCOUNTS, type=int)
@click.option("--state-file", default=None, type=click.Path())
@click.pass_obj
def serve_chain(settings, bind, seed, accounts, state_file):
    """Run the chain-node JSON-RPC server."""
    import uvicorn
    seed = (seed or settings.get("CHAIN_SEED", "idchain-dev")).encode()
    state_file = state_file or settings.get("CHAIN_STATE_FILE")
    node = chain.ChainNode(seed=seed, n_accounts=accounts,
                           state_file=state_file)
    host, port = _split_addr(bind or settings.get("CHAIN_RPC_ADDR",
                                                  "0.0.0.0:8545"))
    uvicorn.run(build_rpc_app(node), host=host, port=port)


@main.command("serve-gateway")
@click.option("--bind", default=None, help="host:port (default 0.0.0.0:50051)")
@click.pass_obj
def serve_gateway(settings, bind):
    """Run the chain-gateway gRPC server."""
    config = GatewayConfig(
        chain_rpc_url=settings.require("CHAIN_NODE_URL"),
        admin_private_key=settings.admin_key(),
    )
    bind = bind or settings.get("CHAIN_GATEWAY_ADDR", "0.0.0.0:50051")
    server, port = gateway_serve(config, bind)
    click.echo(f"gateway listening on {bind}")
    server.wait_for_termination()


@main.command("serve-api")
@click.pass_obj
def serve_api(settings):
    """Run the identity HTTP API."""
    import uvicorn
    config = api_mod.ApiConfig(
        jwt_secret=settings.require("IDENTITY_JWT_SECRET").encode(),
        token_ttl=int(settings.get("IDENTITY_TOKEN_TTL_SECONDS", "1800")),
        store_uri=settings.require("STORE_URI"),
        gateway_addr=settings.require("CHAIN_GATEWAY_ADDR"),
        bind_addr=settings.get("BIND_ADDR", "0.0.0.0:8000"),
    )
    store = store_mod.connect(store_mod.StoreConfig(uri=config.store_uri))
    gateway = GatewayClient(config.gateway_addr)
    app = api_mod.create_app(config, store, gateway)
    host, port = _split_addr(config.bind_addr)
    uvicorn.run(app, host=host, port=port)


@main.command("serve-store")
@click.option("--bind", default=None, help="host:port (default 0.0.0.0:27017)")
@click.option("--data-dir", default=None, type=click.Path())
@click.pass_obj
def serve_store(settings, bind, data_dir):
    """Run the standalone doc-store HTTP service."""
    import uvicorn
    data_dir = data_dir or settings.get("STORE_DATA_DIR")
    backend = (store_mod.FileStore(data_dir) if data_dir
               else store_mod.MemoryStore())
    host, port = _split_addr(bind or settings.get("STORE_BIND_ADDR",
                                                  "0.0.0.0:27017"))
    uvicorn.run(store_mod.build_server_app(backend), host=host, port=port)


def _load_chain_blocks(settings, state_file):
    """Blocks from a state file when given, else over RPC."""
    if state_file:
        with open(state_file) as f:
            return chain.load_blocks(json.load(f))
    rpc = RpcClient(settings.require("CHAIN_NODE_URL"))
    head = int(rpc.call("eth_blockNumber"), 16)
    blocks = []
    for n in range(head + 1):
        b = rpc.call("eth_getBlockByNumber", chain.quantity_hex(n))
        block = chain.Block(
            number=int(b["number"], 16),
            parent_hash=bytes.fromhex(b["parentHash"][2:]),
            timestamp=int(b["timestamp"], 16),
            transactions=[bytes.fromhex(t[2:]) for t in b["transactions"]])
        block.block_hash = bytes.fromhex(b["hash"][2:])
        blocks.append(block)
    return blocks


@main.command("chain-verify")
@click.option("--state-file", default=None, type=click.Path(exists=True))
@click.pass_obj
def chain_verify(settings, state_file):
    """Recompute every block hash and parent link; exit 0 iff valid."""
    try:
        blocks = _load_chain_blocks(settings, state_file)
    except (ChainUnreachable, OSError, click.ClickException) as e:
        click.echo(f"chain unreachable: {e}", err=True)
        sys.exit(2)
    valid = True
    for i, block in enumerate(blocks):
        ok = block.compute_hash() == block.block_hash
        if i == 0:
            ok = ok and block.parent_hash == chain.ZERO_HASH
        else:
            ok = ok and block.parent_hash == blocks[i - 1].block_hash
        click.echo(f"block {block.number} {'OK' if ok else 'FAIL'}")
        valid = valid and ok
    sys.exit(0 if valid else 1)


@main.command("chain-inspect")
@click.argument("ref")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def chain_inspect(settings, ref, as_json):
    """Dump a block (by number) or a transaction receipt (by 0x hash)."""
    rpc = RpcClient(settings.require("CHAIN_NODE_URL"))
    try:
        if ref.startswith("0x") and len(ref) == 66:
            receipt = rpc.call("eth_getTransactionReceipt", ref)
            if receipt is None:
                raise click.ClickException(f"no receipt for {ref}")
            data = {"transaction_hash": receipt["transactionHash"],
                    "block_number": int(receipt["blockNumber"], 16),
                    "gas_used": int(receipt["gasUsed"], 16),
                    "status": "success" if receipt["status"] == "0x1"
                    else "reverted"}
        else:
            b = rpc.call("eth_getBlockByNumber", chain.quantity_hex(int(ref)))
            data = {"number": int(b["number"], 16), "hash": b["hash"],
                    "parent_hash": b["parentHash"],
                    "timestamp": int(b["timestamp"], 16),
                    "transactions": b["transactions"]}
    except RpcError as e:
        raise click.ClickException(str(e))
    except ChainUnreachable as e:
        click.echo(f"chain unreachable: {e}", err=True)
        sys.exit(2)
    if as_json:
        click.echo(json.dumps(data, indent=2))
    else:
        for key, value in data.items():
            click.echo(f"{key:18} {value}")


@main.command("audit-tail")
@click.argument("n", type=int, default=10)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
def audit_tail(settings, n, as_json):
    """Show the newest N audit entries."""
    store = settings.open_store()
    docs, total = store.list("audit_logs", 0, 500)
    while len(docs) < total:
        more, total = store.list("audit_logs", len(docs), 500)
        docs.extend(more)
    newest = [d["body"] for d in docs[-n:]][::-1]
    if as_json:
        click.echo(json.dumps(newest, indent=2))
    else:
        for entry in newest:
            click.echo(f"{entry['timestamp']}  {entry['actor']:24} "
                       f"{entry['action']:12} {entry['outcome']}")


@main.command("anchor-retry")
@click.argument("user_id")
@click.pass_obj
def anchor_retry(settings, user_id):
    """Re-anchor a user whose registration never reached the chain."""
    store = settings.open_store()
    docs = store.find_by("users", "user_id", user_id)
    if not docs:
        raise click.ClickException(f"user {user_id} not found")
    doc = docs[0]
    if doc["body"].get("chain_tx_hash"):
        raise click.ClickException(f"user {user_id} already anchored at "
                                   f"{doc['body']['chain_tx_hash']}")
    gateway = GatewayClient(settings.require("CHAIN_GATEWAY_ADDR"))
    result = gateway.register_user(user_id, doc["body"]["email"],
                                   doc["body"]["cpf"])
    if not result.ok:
        raise click.ClickException(f"chain registration failed: {result.error}")
    body = dict(doc["body"])
    body["chain_tx_hash"] = result.transaction_hash
    store.update("users", doc["id"], body)
    click.echo(f"anchored {user_id} in block {result.block_number} "
               f"tx {result.transaction_hash}")


if __name__ == "__main__":
    main()
