"""Local Ethereum-style chain simulator.

Single trusted node, instamined blocks (one per accepted transaction),
deterministic seeded accounts, fixed-cost identity-registry pseudo-contract,
and SHA-256 everywhere a digest is needed (tx hashes, block hashes, checksum
casing). The signing scheme is deliberately lightweight: the node custodies
every simulated private key, so signatures are verified by recomputation,
exactly as a local dev chain can.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

ETHER = 10 ** 18
GWEI = 10 ** 9
DEFAULT_FUNDING_WEI = 100 * ETHER
DEFAULT_GAS_PRICE = 20 * GWEI
DEFAULT_CHAIN_ID = 1337
DEFAULT_N_ACCOUNTS = 10

GAS_TRANSFER = 21_000
GAS_REGISTRY_CALL = 23_172  # fixed cost for register and verify, success or revert

ZERO_HASH = b"\x00" * 32


class ChainError(Exception):
    pass


class UnknownAccount(ChainError):
    pass


class KeyMismatch(ChainError):
    pass


class BadSignature(ChainError):
    pass


class NonceMismatch(ChainError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"nonce mismatch: expected {expected}, got {got}")
        self.expected = expected
        self.got = got


class InsufficientFunds(ChainError):
    pass


class GasLimitTooLow(ChainError):
    pass


class DuplicateTransaction(ChainError):
    pass


class MalformedCalldata(ChainError):
    pass


class TxNotFound(ChainError):
    pass


class OutOfRange(ChainError):
    pass


class NotHex(ValueError):
    pass


class BadLength(ValueError):
    pass


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def to_hex(data: bytes) -> str:
    return "0x" + data.hex()


def quantity_hex(n: int) -> str:
    return hex(n)


def derive_private_key(seed: bytes, index: int) -> bytes:
    return sha256(seed + b"account" + index.to_bytes(4, "big"))


def derive_address(private_key: bytes) -> bytes:
    return sha256(private_key + b"addr")[:20]


def contract_address(deployer: bytes, nonce: int) -> bytes:
    return sha256(deployer + b"create" + nonce.to_bytes(8, "big"))[:20]


def to_checksum_address(address: str) -> str:
    """EIP-55-style mixed casing, computed with SHA-256 over the lowercase
    hex body. Idempotent; case-only transform."""
    body = address[2:] if address.startswith(("0x", "0X")) else address
    if len(body) != 40:
        raise BadLength(f"address must be 40 hex chars, got {len(body)}")
    try:
        bytes.fromhex(body)
    except ValueError:
        raise NotHex(f"not a hex address: {address}") from None
    lower = body.lower()
    digest = hashlib.sha256(lower.encode()).hexdigest()
    chars = [c.upper() if int(digest[i], 16) >= 8 else c
             for i, c in enumerate(lower)]
    return "0x" + "".join(chars)


@dataclass(frozen=True)
class RawTransaction:
    from_address: str
    to_address: str
    nonce: int
    gas: int
    gas_price: int
    data: bytes
    chain_id: int = DEFAULT_CHAIN_ID

    def encode(self) -> bytes:
        """Canonical byte encoding: sorted-key compact JSON."""
        return json.dumps({
            "chain_id": self.chain_id,
            "data": to_hex(self.data),
            "from": self.from_address.lower(),
            "gas": self.gas,
            "gas_price": self.gas_price,
            "nonce": self.nonce,
            "to": self.to_address.lower(),
        }, sort_keys=True, separators=(",", ":")).encode()

    @staticmethod
    def decode(payload: bytes) -> "RawTransaction":
        try:
            obj = json.loads(payload)
            return RawTransaction(
                from_address=obj["from"],
                to_address=obj["to"],
                nonce=obj["nonce"],
                gas=obj["gas"],
                gas_price=obj["gas_price"],
                data=bytes.fromhex(obj["data"][2:]),
                chain_id=obj["chain_id"],
            )
        except (ValueError, KeyError, TypeError) as e:
            raise BadSignature(f"undecodable transaction payload: {e}") from None


@dataclass(frozen=True)
class SignedTransaction:
    payload: bytes
    signature: bytes

    @property
    def tx_hash(self) -> bytes:
        return sha256(self.payload + self.signature)

    def encode(self) -> bytes:
        """Wire form accepted by eth_sendRawTransaction."""
        return json.dumps({
            "payload": to_hex(self.payload),
            "signature": to_hex(self.signature),
        }, sort_keys=True, separators=(",", ":")).encode()

    @staticmethod
    def decode(raw: bytes) -> "SignedTransaction":
        try:
            obj = json.loads(raw)
            return SignedTransaction(
                payload=bytes.fromhex(obj["payload"][2:]),
                signature=bytes.fromhex(obj["signature"][2:]),
            )
        except (ValueError, KeyError, TypeError) as e:
            raise BadSignature(f"undecodable raw transaction: {e}") from None


def sign_transaction(tx: RawTransaction, private_key: bytes) -> SignedTransaction:
    if derive_address(private_key) != bytes.fromhex(tx.from_address[2:].lower()):
        raise KeyMismatch("private key does not derive the from address")
    payload = tx.encode()
    return SignedTransaction(payload, sha256(private_key + payload))


def encode_register_call(user_id: str, email: str, cpf: str) -> bytes:
    return json.dumps({"method": "register", "user_id": user_id,
                       "email": email, "cpf": cpf},
                      sort_keys=True, separators=(",", ":")).encode()


def encode_verify_call(user_id: str) -> bytes:
    return json.dumps({"method": "verify", "user_id": user_id},
                      sort_keys=True, separators=(",", ":")).encode()


def decode_calldata(data: bytes) -> dict:
    try:
        obj = json.loads(data)
        method = obj["method"]
    except (ValueError, KeyError, TypeError):
        raise MalformedCalldata("calldata does not decode") from None
    if method == "register":
        if not {"user_id", "email", "cpf"} <= set(obj):
            raise MalformedCalldata("register call missing arguments")
    elif method != "verify":
        raise MalformedCalldata(f"unknown method {method!r}")
    return obj


@dataclass(frozen=True)
class TransactionReceipt:
    transaction_hash: str
    block_number: int
    gas_used: int
    status: str  # "success" | "reverted"


@dataclass
class Block:
    number: int
    parent_hash: bytes
    timestamp: int
    transactions: list  # tx hashes, bytes

    def compute_hash(self) -> bytes:
        material = (self.number.to_bytes(8, "big") + self.parent_hash +
                    self.timestamp.to_bytes(8, "big") +
                    b"".join(self.transactions))
        return sha256(material)

    block_hash: bytes = b""

    def seal(self) -> "Block":
        self.block_hash = self.compute_hash()
        return self


@dataclass(frozen=True)
class RegistryEntry:
    user_id: str
    email: str
    cpf: str
    registered_in_block: int


@dataclass
class Account:
    address: str
    private_key: bytes
    balance: int
    nonce: int = 0


def verify_chain(blocks: list[Block]) -> bool:
    """True iff every block hash recomputes and every parent link matches."""
    for i, block in enumerate(blocks):
        if block.compute_hash() != block.block_hash:
            return False
        if i == 0:
            if block.parent_hash != ZERO_HASH:
                return False
        elif block.parent_hash != blocks[i - 1].block_hash:
            return False
    return True


class ChainNode:
    """Single-writer chain state: admission, execution, and block production
    are serialized through one lock; reads hit committed state."""

    def __init__(self, seed: bytes = b"idchain-dev",
                 n_accounts: int = DEFAULT_N_ACCOUNTS,
                 funding_wei: int = DEFAULT_FUNDING_WEI,
                 gas_price: int = DEFAULT_GAS_PRICE,
                 chain_id: int = DEFAULT_CHAIN_ID,
                 clock=None,
                 state_file: str | Path | None = None):
        if n_accounts < 1:
            raise ValueError("need at least one account")
        self._lock = threading.Lock()
        self.chain_id = chain_id
        self.gas_price = gas_price
        self.clock = clock or (lambda: int(time.time()))
        self._state_file = Path(state_file) if state_file else None

        self.accounts: list[Account] = []
        self._by_address: dict[str, Account] = {}
        for i in range(n_accounts):
            priv = derive_private_key(seed, i)
            addr = to_hex(derive_address(priv))
            account = Account(address=addr, private_key=priv, balance=funding_wei)
            self.accounts.append(account)
            self._by_address[addr] = account

        self.initial_supply = n_accounts * funding_wei
        self.fees_burned = 0
        deployer = bytes.fromhex(self.accounts[0].address[2:])
        self.registry_address = to_hex(contract_address(deployer, 0))
        self.registry: dict[str, RegistryEntry] = {}

        genesis = Block(number=0, parent_hash=ZERO_HASH,
                        timestamp=self.clock(), transactions=[]).seal()
        self.blocks: list[Block] = [genesis]
        self.receipts: dict[str, TransactionReceipt] = {}
        self.transactions: dict[str, SignedTransaction] = {}
        self._persist()

    # -- reads ---------------------------------------------------------------

    def get_account(self, address: str) -> Account:
        account = self._by_address.get(address.lower())
        if account is None:
            raise UnknownAccount(address)
        return account

    def get_transaction_count(self, address: str) -> int:
        return self.get_account(address).nonce

    def block_number(self) -> int:
        return self.blocks[-1].number

    def get_block_by_number(self, number: int) -> Block:
        if not 0 <= number <= self.block_number():
            raise OutOfRange(f"no block {number}, head is {self.block_number()}")
        return self.blocks[number]

    def get_transaction_receipt(self, tx_hash: str) -> TransactionReceipt:
        receipt = self.receipts.get(tx_hash.lower())
        if receipt is None:
            raise TxNotFound(tx_hash)
        return receipt

    def registry_lookup(self, user_id: str) -> RegistryEntry | None:
        return self.registry.get(user_id)

    def verify_chain(self) -> bool:
        return verify_chain(self.blocks)

    # -- writes --------------------------------------------------------------

    def send_raw_transaction(self, raw: bytes) -> str:
        signed = SignedTransaction.decode(raw)
        tx = RawTransaction.decode(signed.payload)
        with self._lock:
            sender = self._by_address.get(tx.from_address.lower())
            if sender is None:
                raise BadSignature(f"unknown sender {tx.from_address}")
            if sha256(sender.private_key + signed.payload) != signed.signature:
                raise BadSignature("signature does not verify for sender")
            tx_hash = to_hex(signed.tx_hash)
            if tx_hash in self.receipts:
                raise DuplicateTransaction(tx_hash)
            if tx.nonce != sender.nonce:
                raise NonceMismatch(sender.nonce, tx.nonce)
            gas_required = (GAS_REGISTRY_CALL
                            if tx.to_address.lower() == self.registry_address
                            else GAS_TRANSFER)
            if tx.gas < gas_required:
                raise GasLimitTooLow(
                    f"gas limit {tx.gas} below required {gas_required}")
            if sender.balance < tx.gas * tx.gas_price:
                raise InsufficientFunds(
                    f"balance {sender.balance} cannot cover max fee")

            block_number = self.block_number() + 1
            if tx.to_address.lower() == self.registry_address:
                status = self._execute_registry_call(tx.data, block_number)
                gas_used = GAS_REGISTRY_CALL
            else:
                status, gas_used = "success", GAS_TRANSFER

            fee = gas_used * tx.gas_price
            sender.balance -= fee
            self.fees_burned += fee
            sender.nonce += 1

            block = Block(number=block_number,
                          parent_hash=self.blocks[-1].block_hash,
                          timestamp=self.clock(),
                          transactions=[signed.tx_hash]).seal()
            self.blocks.append(block)
            self.transactions[tx_hash] = signed
            self.receipts[tx_hash] = TransactionReceipt(
                transaction_hash=tx_hash, block_number=block_number,
                gas_used=gas_used, status=status)
            self._persist()
            return tx_hash

    def _execute_registry_call(self, data: bytes, block_number: int) -> str:
        call = decode_calldata(data)
        if call["method"] == "verify":
            return "success"
        user_id, email, cpf = call["user_id"], call["email"], call["cpf"]
        for entry in self.registry.values():
            if entry.user_id == user_id or entry.email == email or entry.cpf == cpf:
                return "reverted"
        self.registry[user_id] = RegistryEntry(
            user_id=user_id, email=email, cpf=cpf,
            registered_in_block=block_number)
        return "success"

    # -- persistence ---------------------------------------------------------

    def _persist(self):
        if self._state_file is None:
            return
        self._state_file.write_text(json.dumps(self.dump_state(), indent=1))

    def dump_state(self) -> dict:
        return {
            "chain_id": self.chain_id,
            "registry_address": self.registry_address,
            "fees_burned": self.fees_burned,
            "accounts": [{"address": a.address, "balance": a.balance,
                          "nonce": a.nonce} for a in self.accounts],
            "blocks": [{
                "number": b.number,
                "parent_hash": to_hex(b.parent_hash),
                "timestamp": b.timestamp,
                "transactions": [to_hex(t) for t in b.transactions],
                "block_hash": to_hex(b.block_hash),
            } for b in self.blocks],
            "receipts": {h: asdict(r) for h, r in self.receipts.items()},
            "registry": {k: asdict(v) for k, v in self.registry.items()},
        }


def load_blocks(state: dict) -> list[Block]:
    """Rebuild Block objects from a persisted state dump (for offline
    verification)."""
    blocks = []
    for b in state["blocks"]:
        block = Block(number=b["number"],
                      parent_hash=bytes.fromhex(b["parent_hash"][2:]),
                      timestamp=b["timestamp"],
                      transactions=[bytes.fromhex(t[2:])
                                    for t in b["transactions"]])
        block.block_hash = bytes.fromhex(b["block_hash"][2:])
        blocks.append(block)
    return blocks
