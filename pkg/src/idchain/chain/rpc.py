"""JSON-RPC 2.0 surface of the chain node, plus the client used by the
gateway and the CLI.

Numeric fields use 0x hex-quantity encoding. Every call is logged one line
(method name + params digest).
"""

from __future__ import annotations

import hashlib
import json
import logging

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import node as chain

log = logging.getLogger("idchain.chain.rpc")

RPC_INTERNAL_ERROR = -32603
RPC_METHOD_NOT_FOUND = -32601
RPC_INVALID_REQUEST = -32600
RPC_EXECUTION_ERROR = -32000


class RpcError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


class ChainUnreachable(Exception):
    pass


def _receipt_json(receipt: chain.TransactionReceipt) -> dict:
    return {
        "transactionHash": receipt.transaction_hash,
        "blockNumber": chain.quantity_hex(receipt.block_number),
        "gasUsed": chain.quantity_hex(receipt.gas_used),
        "status": "0x1" if receipt.status == "success" else "0x0",
    }


def _block_json(block: chain.Block) -> dict:
    return {
        "number": chain.quantity_hex(block.number),
        "hash": chain.to_hex(block.block_hash),
        "parentHash": chain.to_hex(block.parent_hash),
        "timestamp": chain.quantity_hex(block.timestamp),
        "transactions": [chain.to_hex(t) for t in block.transactions],
    }


class RpcDispatcher:
    def __init__(self, node: chain.ChainNode):
        self.node = node
        self._methods = {
            "eth_chainId": self.eth_chain_id,
            "eth_accounts": self.eth_accounts,
            "eth_getTransactionCount": self.eth_get_transaction_count,
            "eth_gasPrice": self.eth_gas_price,
            "eth_sendRawTransaction": self.eth_send_raw_transaction,
            "eth_getTransactionReceipt": self.eth_get_transaction_receipt,
            "eth_blockNumber": self.eth_block_number,
            "eth_getBlockByNumber": self.eth_get_block_by_number,
            "registry_address": self.registry_address,
            "registry_verify": self.registry_verify,
        }

    def eth_chain_id(self):
        return chain.quantity_hex(self.node.chain_id)

    def eth_accounts(self):
        return [a.address for a in self.node.accounts]

    def eth_get_transaction_count(self, address: str):
        return chain.quantity_hex(self.node.get_transaction_count(address))

    def eth_gas_price(self):
        return chain.quantity_hex(self.node.gas_price)

    def eth_send_raw_transaction(self, raw_hex: str):
        return self.node.send_raw_transaction(bytes.fromhex(raw_hex[2:]))

    def eth_get_transaction_receipt(self, tx_hash: str):
        try:
            return _receipt_json(self.node.get_transaction_receipt(tx_hash))
        except chain.TxNotFound:
            return None  # Ethereum convention for unknown/pending hashes

    def eth_block_number(self):
        return chain.quantity_hex(self.node.block_number())

    def eth_get_block_by_number(self, number_hex: str):
        return _block_json(self.node.get_block_by_number(int(number_hex, 16)))

    def registry_address(self):
        return self.node.registry_address

    def registry_verify(self, user_id: str):
        entry = self.node.registry_lookup(user_id)
        if entry is None:
            return {"present": False, "blockNumber": None}
        return {"present": True,
                "blockNumber": chain.quantity_hex(entry.registered_in_block)}

    def dispatch(self, method: str, params: list):
        digest = hashlib.sha256(
            json.dumps(params, sort_keys=True, default=str).encode()
        ).hexdigest()[:12]
        log.info("rpc %s params_digest=%s", method, digest)
        handler = self._methods.get(method)
        if handler is None:
            raise RpcError(RPC_METHOD_NOT_FOUND, f"unknown method {method}")
        try:
            return handler(*params)
        except chain.ChainError as e:
            raise RpcError(RPC_EXECUTION_ERROR,
                           f"{type(e).__name__}: {e}") from e
        except (TypeError, ValueError) as e:
            raise RpcError(RPC_INVALID_REQUEST, str(e)) from e


def build_rpc_app(node: chain.ChainNode):
    dispatcher = RpcDispatcher(node)
    app = FastAPI(title="chain-node", docs_url=None, redoc_url=None,
                  openapi_url=None)

    @app.post("/")
    async def rpc(request: Request):
        try:
            body = await request.json()
        except Exception:
            return JSONResponse({"jsonrpc": "2.0", "id": None, "error": {
                "code": RPC_INVALID_REQUEST, "message": "invalid JSON"}})
        req_id = body.get("id")
        try:
            result = dispatcher.dispatch(body.get("method", ""),
                                         body.get("params", []))
            return JSONResponse({"jsonrpc": "2.0", "id": req_id,
                                 "result": result})
        except RpcError as e:
            return JSONResponse({"jsonrpc": "2.0", "id": req_id, "error": {
                "code": e.code, "message": e.message}})

    return app


class RpcClient:
    """Minimal JSON-RPC 2.0 client over HTTP."""

    def __init__(self, url: str, timeout: float = 10.0):
        import httpx
        self.url = url
        self._client = httpx.Client(timeout=timeout)
        self._next_id = 0

    def call(self, method: str, *params):
        import httpx
        self._next_id += 1
        try:
            resp = self._client.post(self.url, json={
                "jsonrpc": "2.0", "id": self._next_id,
                "method": method, "params": list(params)})
        except httpx.HTTPError as e:
            raise ChainUnreachable(f"chain node at {self.url}: {e}") from e
        body = resp.json()
        if "error" in body:
            err = body["error"]
            raise RpcError(err["code"], err["message"])
        return body["result"]

    def close(self):
        self._client.close()
