"""Acceptance suite: one test per acceptance criterion, each printing a
pass/fail line with its measured numbers."""

import random
import time

import pytest

from conftest import ChainStack, Clock, FakeGateway, register_payload
from idchain import api as api_mod
from idchain import identity, store as store_mod, tokens
from idchain.chain import node as chain
from test_identity import oracle_check_digits
from test_tokens import GOLDEN_TOKEN

SEED = b"acceptance-seed"


def crit(name, ok, extra=""):
    print(f"[{'PASS' if ok else 'FAIL'}] {name} {extra}".rstrip())
    assert ok, name


def make_api(clock, gateway):
    from fastapi.testclient import TestClient
    store = store_mod.MemoryStore()
    config = api_mod.ApiConfig(jwt_secret=b"test-secret")
    app = api_mod.create_app(config, store, gateway, clock=clock)
    client = TestClient(app)
    client.store = store
    return client


def test_end_to_end_registration():
    """Hermetic chain-node + gateway + store + api; first registration lands
    in block 1 with gas_used exactly 23172; total runtime < 5 s."""
    started = time.perf_counter()
    clock = Clock()
    stack = ChainStack(clock, seed=SEED)
    try:
        client = make_api(clock, stack.gateway)
        resp = client.post("/auth/register", json=register_payload(0))
        assert resp.status_code == 201
        tx_hash = resp.json()["chain_tx_hash"]
        assert tx_hash
        receipt = stack.gateway.get_receipt(tx_hash)
        elapsed = time.perf_counter() - started
        crit("end-to-end registration",
             receipt.ok and receipt.gas_used == 23172
             and receipt.block_number == 1 and elapsed < 5.0,
             f"(gas_used={receipt.gas_used}, block={receipt.block_number}, "
             f"{elapsed:.2f}s)")
    finally:
        stack.stop()


def test_gas_fee_accounting():
    """After k registrations: admin balance = 10^20 - k*23172*20e9 exactly,
    chain head = k."""
    clock = Clock()
    stack = ChainStack(clock, seed=SEED)
    try:
        k = 5
        for i in range(k):
            payload = register_payload(i)
            result = stack.gateway.register_user(
                f"user-{i}", payload["email"], payload["cpf"])
            assert result.ok
        balance = stack.node.accounts[0].balance
        expected = 10 ** 20 - k * 23172 * (20 * 10 ** 9)
        head = stack.node.block_number()
        crit("gas/fee accounting", balance == expected and head == k,
             f"(balance={balance}, head={head})")
    finally:
        stack.stop()


def test_chain_integrity_property_suite():
    """>=1000 randomized valid/duplicate/replayed sequences keep every chain
    invariant; injected single-bit tampers are detected; < 30 s."""
    started = time.perf_counter()
    rng = random.Random(20260824)
    cases = 1000
    for case in range(cases):
        node = chain.ChainNode(seed=SEED + case.to_bytes(4, "big"),
                               n_accounts=3, clock=lambda: 1_700_000_000)
        sent = []
        for _ in range(rng.randrange(1, 51)):
            choice = rng.random()
            if choice < 0.15 and sent:
                # replay previously included bytes
                with pytest.raises((chain.DuplicateTransaction,
                                    chain.NonceMismatch)):
                    node.send_raw_transaction(rng.choice(sent))
                continue
            sender = node.accounts[rng.randrange(3)]
            user = f"u-{rng.randrange(8)}"  # collisions revert, still mined
            tx = chain.RawTransaction(
                from_address=sender.address,
                to_address=node.registry_address,
                nonce=sender.nonce, gas=3_000_000,
                gas_price=20 * chain.GWEI,
                data=chain.encode_register_call(user, f"{user}@x.co",
                                                f"{rng.randrange(10**11):011d}"))
            signed = chain.sign_transaction(tx, sender.private_key)
            node.send_raw_transaction(signed.encode())
            sent.append(signed.encode())

        assert node.verify_chain()
        assert sum(a.balance for a in node.accounts) + node.fees_burned \
            == node.initial_supply
        for account in node.accounts:
            included = sorted(
                chain.RawTransaction.decode(
                    chain.SignedTransaction.decode(raw).payload).nonce
                for raw in sent
                if chain.RawTransaction.decode(
                    chain.SignedTransaction.decode(raw).payload
                ).from_address == account.address)
            assert included == list(range(len(included)))

        if case % 10 == 0 and len(node.blocks) > 1:
            # single-bit tamper on a random persisted block field
            block = node.blocks[rng.randrange(1, len(node.blocks))]
            if rng.random() < 0.5 and block.transactions:
                h = block.transactions[0]
                i = rng.randrange(32)
                block.transactions[0] = \
                    h[:i] + bytes([h[i] ^ (1 << rng.randrange(8))]) + h[i + 1:]
            else:
                h = block.parent_hash
                i = rng.randrange(32)
                block.parent_hash = \
                    h[:i] + bytes([h[i] ^ (1 << rng.randrange(8))]) + h[i + 1:]
            assert not node.verify_chain()
    elapsed = time.perf_counter() - started
    crit("chain integrity property suite", elapsed < 30.0,
         f"({cases} cases, {elapsed:.2f}s)")


def test_auth_suite():
    """Token round trip, expiry, tamper, logout revocation 204->401, golden
    HS256 equality, and the Listing-1 detail string on every 401."""
    secret, t0 = b"test-secret", 1_700_000_000
    # round trip
    token = tokens.create_access_token("alice@example.com", 1800, secret, t0)
    assert tokens.decode_token(token, secret, t0 + 1) == "alice@example.com"
    # expiry
    with pytest.raises(tokens.ExpiredToken):
        tokens.decode_token(token, secret, t0 + 1801)
    # tamper: flip one character in each segment
    for pos in (5, len(token) // 2, len(token) - 2):
        flipped = "A" if token[pos] != "A" else "B"
        tampered = token[:pos] + flipped + token[pos + 1:]
        with pytest.raises(tokens.TokenError):
            tokens.decode_token(tampered, secret, t0)
    # golden equality against the independently generated oracle value
    assert token == GOLDEN_TOKEN

    # logout revocation over the API: exact 204 -> 401 sequence
    clock = Clock(t0)
    client = make_api(clock, FakeGateway())
    client.post("/auth/register", json=register_payload(0))
    payload = register_payload(0)
    login = client.post("/auth/login", json={"email": payload["email"],
                                             "password": payload["password"]})
    headers = {"Authorization": f"Bearer {login.json()['access_token']}"}
    assert client.post("/auth/logout", headers=headers).status_code == 204
    after = client.get("/users", headers=headers)
    assert after.status_code == 401

    # every 401 carries the exact detail string
    unauthorized = [
        after,
        client.get("/users"),
        client.get("/users", headers={"Authorization": "Bearer junk"}),
        client.post("/auth/logout", headers=headers),
    ]
    ok = all(r.status_code == 401 and
             r.json()["detail"] == "Could not validate credentials"
             for r in unauthorized)
    crit("auth suite", ok)


def test_cpf_oracle_equivalence():
    """10,000 random 9-digit prefixes: validate_cpf accepts exactly the
    mod-11 oracle pair; < 5 s."""
    started = time.perf_counter()
    rng = random.Random(424242)
    exhaustive_budget = 1000
    for n in range(10_000):
        prefix = f"{rng.randrange(10 ** 9):09d}"
        d1, d2 = oracle_check_digits(prefix)
        expected = prefix + str(d1) + str(d2)
        if expected == expected[0] * 11:
            assert not identity.validate_cpf(expected)
            continue
        assert identity.validate_cpf(expected)
        if n < exhaustive_budget:
            for a in range(10):
                for b in range(10):
                    candidate = prefix + str(a) + str(b)
                    if candidate != expected:
                        assert not identity.validate_cpf(candidate)
        else:
            wrong = prefix + str((d1 + 1) % 10) + str(d2)
            assert not identity.validate_cpf(wrong)
    elapsed = time.perf_counter() - started
    crit("cpf oracle equivalence", elapsed < 5.0, f"({elapsed:.2f}s)")


def test_audit_completeness():
    """200 random API calls: per-action audit-entry counts match request
    counts; the audit collection is append-only."""
    clock = Clock()
    client = make_api(clock, FakeGateway())
    rng = random.Random(99)

    expected = {action: 0 for action in api_mod.AUDIT_ACTIONS}
    registered = []
    token = None

    def ensure_token():
        nonlocal token
        if token is None:
            i = registered[0]
            payload = register_payload(i)
            resp = client.post("/auth/login", json={
                "email": payload["email"], "password": payload["password"]})
            expected["login"] += 1
            token = resp.json()["access_token"]
        return {"Authorization": f"Bearer {token}"}

    for _ in range(200):
        # distinct issuance instants: a re-login at the same second would
        # mint byte-identical (and already revoked) tokens
        clock.advance(1)
        op = rng.choice(["register", "login_ok", "login_bad", "list",
                         "get", "update", "audit", "logout"])
        if op == "register" or not registered:
            i = len(registered)
            if i >= 8:  # register_payload cycles 8 distinct cpfs
                continue
            resp = client.post("/auth/register", json=register_payload(i))
            assert resp.status_code == 201
            registered.append(i)
            expected["register"] += 1
        elif op == "login_ok":
            payload = register_payload(registered[0])
            client.post("/auth/login", json={"email": payload["email"],
                                             "password": payload["password"]})
            expected["login"] += 1
        elif op == "login_bad":
            client.post("/auth/login", json={"email": "ghost@example.com",
                                             "password": "wrong-password"})
            expected["login_failed"] += 1
        elif op == "list":
            assert client.get("/users",
                              headers=ensure_token()).status_code == 200
            expected["user_view"] += 1
        elif op == "get":
            headers = ensure_token()
            uid = client.get("/users", headers=headers).json()["users"][0][
                "user_id"]
            expected["user_view"] += 1
            assert client.get(f"/users/{uid}",
                              headers=headers).status_code == 200
            expected["user_view"] += 1
        elif op == "update":
            headers = ensure_token()
            users = client.get("/users", headers=headers).json()["users"]
            expected["user_view"] += 1
            target = rng.choice(users)
            client.put(f"/users/{target['user_id']}", headers=headers,
                       json={"name": f"Renamed {rng.randrange(1000)}"})
            expected["user_update"] += 1
        elif op == "audit":
            assert client.get("/audit",
                              headers=ensure_token()).status_code == 200
            expected["audit_view"] += 1
        elif op == "logout":
            headers = ensure_token()
            assert client.post("/auth/logout",
                               headers=headers).status_code == 204
            expected["logout"] += 1
            token = None

    docs, total = client.store.list("audit_logs", 0, 500)
    while len(docs) < total:
        more, total = client.store.list("audit_logs", len(docs), 500)
        docs.extend(more)
    actual = {action: 0 for action in api_mod.AUDIT_ACTIONS}
    for doc in docs:
        actual[doc["body"]["action"]] += 1

    append_only = False
    try:
        client.store.update("audit_logs", docs[0]["id"], docs[0]["body"])
    except store_mod.AppendOnlyViolation:
        try:
            client.store.delete("audit_logs", docs[0]["id"])
        except store_mod.AppendOnlyViolation:
            append_only = True

    crit("audit completeness", actual == expected and append_only,
         f"({sum(actual.values())} entries)")


def test_protected_route_exhaustiveness():
    """Every route except register/login/health rejects tokenless requests
    with 401."""
    client = make_api(Clock(), FakeGateway())
    open_routes = {("/auth/register", "POST"), ("/auth/login", "POST"),
                   ("/health", "GET")}
    checked = 0
    for route in client.app.routes:
        if not hasattr(route, "methods"):
            continue
        path = route.path.replace("{user_id}", "some-id")
        for method in route.methods - {"HEAD", "OPTIONS"}:
            if (route.path, method) in open_routes:
                continue
            resp = client.request(method, path)
            assert resp.status_code == 401, (path, method)
            checked += 1
    crit("protected-route exhaustiveness", checked >= 6,
         f"({checked} protected routes)")
