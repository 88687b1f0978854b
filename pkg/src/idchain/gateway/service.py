"""gRPC IdentityChain service: build, sign, send, and await receipts for
registry transactions against the chain node, plus the client used by the
identity API.

The gateway is stateless: the admin nonce is re-fetched per request, and
concurrent RegisterUser calls are serialized through one lock (a single admin
account would otherwise race on nonces).
"""

from __future__ import annotations

import logging
import threading
import time
from concurrent import futures
from dataclasses import dataclass

import grpc

from ..chain import node as chain
from ..chain.rpc import RpcClient, RpcError, ChainUnreachable
from . import proto

log = logging.getLogger("idchain.gateway")

REGISTER_GAS_LIMIT = 3_000_000
REGISTER_GAS_PRICE = 20 * chain.GWEI
RECEIPT_POLL_INTERVAL = 0.1
RECEIPT_POLL_TIMEOUT = 10.0


@dataclass(frozen=True)
class GatewayConfig:
    chain_rpc_url: str
    admin_private_key: bytes
    receipt_timeout: float = RECEIPT_POLL_TIMEOUT
    poll_interval: float = RECEIPT_POLL_INTERVAL


class IdentityChainServicer:
    def __init__(self, config: GatewayConfig):
        self.config = config
        self._rpc = RpcClient(config.chain_rpc_url)
        self._admission = threading.Lock()

    # -- pipeline ------------------------------------------------------------

    def _register_on_chain(self, user_id: str, email: str, cpf: str) -> dict:
        rpc = self._rpc
        admin = chain.to_checksum_address(rpc.call("eth_accounts")[0])
        if chain.derive_address(self.config.admin_private_key) != \
                bytes.fromhex(admin[2:].lower()):
            raise RuntimeError("configured admin key does not match accounts[0]")
        nonce = int(rpc.call("eth_getTransactionCount", admin), 16)
        tx = chain.RawTransaction(
            from_address=admin.lower(),
            to_address=rpc.call("registry_address"),
            nonce=nonce,
            gas=REGISTER_GAS_LIMIT,
            gas_price=REGISTER_GAS_PRICE,
            data=chain.encode_register_call(user_id, email, cpf),
            chain_id=int(rpc.call("eth_chainId"), 16),
        )
        signed = chain.sign_transaction(tx, self.config.admin_private_key)
        tx_hash = rpc.call("eth_sendRawTransaction",
                           chain.to_hex(signed.encode()))
        receipt = self._wait_for_receipt(tx_hash)
        return receipt

    def _wait_for_receipt(self, tx_hash: str) -> dict:
        deadline = time.monotonic() + self.config.receipt_timeout
        while True:
            receipt = self._rpc.call("eth_getTransactionReceipt", tx_hash)
            if receipt is not None:
                return receipt
            if time.monotonic() > deadline:
                raise TimeoutError(f"no receipt for {tx_hash} within "
                                   f"{self.config.receipt_timeout}s")
            time.sleep(self.config.poll_interval)

    # -- rpc handlers --------------------------------------------------------

    def RegisterUser(self, request, context):
        if not (request.user_id and request.email and request.cpf):
            return proto.ChainResult(ok=False,
                                     error="user_id, email, cpf are required")
        with self._admission:
            try:
                receipt = self._register_on_chain(
                    request.user_id, request.email, request.cpf)
            except Exception as e:  # errors-as-values at this boundary
                log.warning("RegisterUser(%s) failed: %s", request.user_id, e)
                return proto.ChainResult(ok=False, error=str(e))
        if receipt["status"] != "0x1":
            return proto.ChainResult(ok=False, error=(
                f"transaction {receipt['transactionHash']} reverted in block "
                f"{int(receipt['blockNumber'], 16)}"))
        return proto.ChainResult(
            ok=True,
            transaction_hash=receipt["transactionHash"],
            block_number=int(receipt["blockNumber"], 16),
            gas_used=int(receipt["gasUsed"], 16),
        )

    def VerifyUser(self, request, context):
        try:
            result = self._rpc.call("registry_verify", request.user_id)
        except ChainUnreachable as e:
            context.abort(grpc.StatusCode.UNAVAILABLE, str(e))
        if not result["present"]:
            return proto.VerifyUserReply(present=False)
        return proto.VerifyUserReply(
            present=True, block_number=int(result["blockNumber"], 16))

    def GetReceipt(self, request, context):
        try:
            receipt = self._rpc.call("eth_getTransactionReceipt",
                                     request.transaction_hash)
        except ChainUnreachable as e:
            context.abort(grpc.StatusCode.UNAVAILABLE, str(e))
        if receipt is None:
            context.abort(grpc.StatusCode.NOT_FOUND,
                          f"no receipt for {request.transaction_hash}")
        ok = receipt["status"] == "0x1"
        return proto.ChainResult(
            ok=ok,
            transaction_hash=receipt["transactionHash"],
            block_number=int(receipt["blockNumber"], 16),
            gas_used=int(receipt["gasUsed"], 16),
            error="" if ok else "transaction reverted",
        )

    def Health(self, request, context):
        try:
            head = int(self._rpc.call("eth_blockNumber"), 16)
        except (ChainUnreachable, RpcError):
            return proto.HealthReply(chain_ok=False)
        return proto.HealthReply(chain_ok=True, head=head)

    def close(self):
        self._rpc.close()


def _generic_handler(servicer: IdentityChainServicer):
    handlers = {}
    for name, (req_cls, resp_cls) in proto.METHODS.items():
        handlers[name] = grpc.unary_unary_rpc_method_handler(
            getattr(servicer, name),
            request_deserializer=req_cls.FromString,
            response_serializer=lambda msg: msg.SerializeToString(),
        )
    return grpc.method_handlers_generic_handler(proto.SERVICE, handlers)


def serve(config: GatewayConfig, bind_addr: str = "127.0.0.1:0",
          max_workers: int = 8):
    """Start the gRPC server; returns (server, bound port)."""
    servicer = IdentityChainServicer(config)
    server = grpc.server(futures.ThreadPoolExecutor(max_workers=max_workers))
    server.add_generic_rpc_handlers((_generic_handler(servicer),))
    port = server.add_insecure_port(bind_addr)
    server.start()
    log.info("gateway serving on %s (port %d)", bind_addr, port)
    return server, port


class GatewayClient:
    """Typed client over the IdentityChain gRPC service."""

    def __init__(self, address: str, timeout: float = 15.0):
        self.timeout = timeout
        self._channel = grpc.insecure_channel(address)
        self._stubs = {}
        for name, (req_cls, resp_cls) in proto.METHODS.items():
            self._stubs[name] = self._channel.unary_unary(
                f"/{proto.SERVICE}/{name}",
                request_serializer=lambda msg: msg.SerializeToString(),
                response_deserializer=resp_cls.FromString,
            )

    def register_user(self, user_id: str, email: str, cpf: str):
        return self._stubs["RegisterUser"](
            proto.RegisterUserRequest(user_id=user_id, email=email, cpf=cpf),
            timeout=self.timeout)

    def verify_user(self, user_id: str):
        return self._stubs["VerifyUser"](
            proto.VerifyUserRequest(user_id=user_id), timeout=self.timeout)

    def get_receipt(self, tx_hash: str):
        return self._stubs["GetReceipt"](
            proto.GetReceiptRequest(transaction_hash=tx_hash),
            timeout=self.timeout)

    def health(self):
        return self._stubs["Health"](proto.HealthRequest(),
                                     timeout=self.timeout)

    def close(self):
        self._channel.close()
