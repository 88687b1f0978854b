import threading

import pytest

from idchain import store as store_mod
from idchain.store import (AppendOnlyViolation, ConnectionExhausted,
                           DuplicateKey, FileStore, MemoryStore, NotFound,
                           PageBounds, RemoteStore, SchemaViolation,
                           StoreConfig, UnknownCollection, build_server_app,
                           connect)


def user_body(i=0, **overrides):
    body = {
        "user_id": f"u{i}",
        "name": f"User {i}",
        "cpf": f"{i:011d}",
        "email": f"u{i}@example.com",
        "password_hash": "pbkdf2_sha256$100000$00$00",
        "created_at": "2024-01-01T00:00:00+00:00",
    }
    body.update(overrides)
    return body


def audit_body(action="login"):
    return {"timestamp": "2024-01-01T00:00:00+00:00", "actor": "a@b.co",
            "action": action, "outcome": "success"}


class TestMemoryStore:
    def test_read_your_write(self):
        store = MemoryStore()
        doc = store.insert("users", user_body())
        assert doc["version"] == 1
        assert store.get("users", doc["id"])["body"] == user_body()

    def test_duplicate_email(self):
        store = MemoryStore()
        store.insert("users", user_body(0))
        with pytest.raises(DuplicateKey) as e:
            store.insert("users", user_body(1, email="u0@example.com"))
        assert e.value.field == "email"

    def test_duplicate_cpf(self):
        store = MemoryStore()
        store.insert("users", user_body(0))
        with pytest.raises(DuplicateKey) as e:
            store.insert("users", user_body(1, cpf=f"{0:011d}"))
        assert e.value.field == "cpf"

    def test_schema_violation(self):
        store = MemoryStore()
        with pytest.raises(SchemaViolation):
            store.insert("audit_logs", {"actor": "x"})

    def test_unknown_collection(self):
        with pytest.raises(UnknownCollection):
            MemoryStore().find_by("nope", "a", 1)

    def test_find_by_insertion_order(self):
        store = MemoryStore()
        store.insert("audit_logs", audit_body("login"))
        store.insert("audit_logs", audit_body("logout"))
        store.insert("audit_logs", audit_body("login"))
        found = store.find_by("audit_logs", "action", "login")
        assert [d["body"]["action"] for d in found] == ["login", "login"]
        assert store.find_by("audit_logs", "action", "register") == []

    def test_update_bumps_version(self):
        store = MemoryStore()
        doc = store.insert("users", user_body())
        updated = store.update("users", doc["id"], user_body(name="Renamed"))
        assert updated["version"] == 2
        assert updated["body"]["name"] == "Renamed"

    def test_update_unique_check_excludes_self(self):
        store = MemoryStore()
        doc = store.insert("users", user_body(0))
        store.insert("users", user_body(1))
        store.update("users", doc["id"], user_body(0, name="Same email ok"))
        with pytest.raises(DuplicateKey):
            store.update("users", doc["id"],
                         user_body(0, email="u1@example.com"))

    def test_delete_twice(self):
        store = MemoryStore()
        doc = store.insert("users", user_body())
        assert store.delete("users", doc["id"]) is True
        with pytest.raises(NotFound):
            store.delete("users", doc["id"])

    def test_list_pagination(self):
        store = MemoryStore()
        for i in range(5):
            store.insert("users", user_body(i))
        page, total = store.list("users", 4, 2)
        assert len(page) == 1 and total == 5

    @pytest.mark.parametrize("offset,limit", [(-1, 10), (0, 0), (0, 501)])
    def test_page_bounds(self, offset, limit):
        with pytest.raises(PageBounds):
            MemoryStore().list("users", offset, limit)

    def test_audit_logs_append_only(self):
        store = MemoryStore()
        doc = store.insert("audit_logs", audit_body())
        with pytest.raises(AppendOnlyViolation):
            store.update("audit_logs", doc["id"], audit_body("logout"))
        with pytest.raises(AppendOnlyViolation):
            store.delete("audit_logs", doc["id"])

    def test_concurrent_insert_storm_keeps_uniqueness(self):
        store = MemoryStore()
        errors = []

        def worker():
            try:
                store.insert("users", user_body(0))
            except DuplicateKey as e:
                errors.append(e)

        threads = [threading.Thread(target=worker) for _ in range(16)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        _, total = store.list("users", 0, 500)
        assert total == 1
        assert len(errors) == 15


class TestFileStore:
    def test_durable_across_reopen(self, tmp_path):
        store = FileStore(tmp_path / "db")
        doc = store.insert("users", user_body())
        store.insert("audit_logs", audit_body())
        store.update("users", doc["id"], user_body(name="Renamed"))
        store.close()

        reopened = FileStore(tmp_path / "db")
        got = reopened.get("users", doc["id"])
        assert got["body"]["name"] == "Renamed"
        assert got["version"] == 2
        _, total = reopened.list("audit_logs", 0, 500)
        assert total == 1

    def test_delete_survives_reopen(self, tmp_path):
        store = FileStore(tmp_path / "db")
        doc = store.insert("users", user_body())
        store.delete("users", doc["id"])
        store.close()
        reopened = FileStore(tmp_path / "db")
        _, total = reopened.list("users", 0, 500)
        assert total == 0


class TestConnect:
    def config(self, retries=3):
        return StoreConfig(uri="memory://", max_retries=retries,
                           backoff_base=0.25)

    def test_healthy_first_attempt(self):
        waits = []
        handle = connect(self.config(), sleep=waits.append)
        assert handle.ping()
        assert waits == []

    def test_recovers_on_attempt_two(self, caplog):
        attempts = []
        waits = []

        def opener(config):
            attempts.append(1)
            if len(attempts) < 3:
                raise ConnectionError("backend not up yet")
            return MemoryStore()

        with caplog.at_level("WARNING", logger="idchain.store"):
            handle = connect(self.config(3), sleep=waits.append, opener=opener)
        assert handle.ping()
        assert waits == [0.25, 0.5]  # exponential: base * 2^attempt
        failures = [r for r in caplog.records
                    if "connection failed" in r.message]
        assert len(failures) == 2

    def test_exhausted(self):
        def opener(config):
            raise ConnectionError("permanently down")

        attempts = []

        def counting_opener(config):
            attempts.append(1)
            raise ConnectionError("permanently down")

        with pytest.raises(ConnectionExhausted):
            connect(self.config(2), sleep=lambda s: None,
                    opener=counting_opener)
        assert len(attempts) == 3  # 1 initial + 2 retries

    def test_config_validation(self):
        with pytest.raises(ValueError):
            StoreConfig(uri="memory://", max_retries=-1)
        with pytest.raises(ValueError):
            StoreConfig(uri="memory://", backoff_base=0)


class TestRemoteStore:
    @pytest.fixture
    def remote(self):
        from idchain.serving import ServerThread
        backend = MemoryStore()
        server = ServerThread(build_server_app(backend)).start()
        store = RemoteStore(server.url)
        yield store
        store.close()
        server.stop()

    def test_round_trip(self, remote):
        doc = remote.insert("users", user_body())
        assert remote.get("users", doc["id"])["body"]["email"] == \
            "u0@example.com"
        assert remote.find_by("users", "user_id", "u0")[0]["id"] == doc["id"]
        page, total = remote.list("users", 0, 10)
        assert total == 1

    def test_errors_map_back(self, remote):
        remote.insert("users", user_body())
        with pytest.raises(DuplicateKey) as e:
            remote.insert("users", user_body())
        assert e.value.field == "user_id"
        with pytest.raises(NotFound):
            remote.get("users", "missing")
        doc = remote.insert("audit_logs", audit_body())
        with pytest.raises(AppendOnlyViolation):
            remote.delete("audit_logs", doc["id"])

    def test_connect_retries_then_reaches_remote(self):
        config = StoreConfig(uri="http://127.0.0.1:1/", max_retries=1,
                             backoff_base=0.01)
        with pytest.raises(ConnectionExhausted):
            connect(config, sleep=lambda s: None)
