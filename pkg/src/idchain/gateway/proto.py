"""Runtime-built protobuf message classes for identity_chain.proto.

The descriptors here mirror identity_chain.proto field for field. They are
constructed at runtime with descriptor_pb2 instead of protoc codegen so the
generated classes always match the installed protobuf runtime.
"""

from __future__ import annotations

from google.protobuf import descriptor_pb2, descriptor_pool, message_factory

_F = descriptor_pb2.FieldDescriptorProto

PACKAGE = "identitychain.v1"
SERVICE = f"{PACKAGE}.IdentityChain"

_MESSAGES = {
    "RegisterUserRequest": [
        ("user_id", 1, _F.TYPE_STRING),
        ("email", 2, _F.TYPE_STRING),
        ("cpf", 3, _F.TYPE_STRING),
    ],
    "ChainResult": [
        ("ok", 1, _F.TYPE_BOOL),
        ("transaction_hash", 2, _F.TYPE_STRING),
        ("block_number", 3, _F.TYPE_UINT64),
        ("gas_used", 4, _F.TYPE_UINT64),
        ("error", 5, _F.TYPE_STRING),
    ],
    "VerifyUserRequest": [
        ("user_id", 1, _F.TYPE_STRING),
    ],
    "VerifyUserReply": [
        ("present", 1, _F.TYPE_BOOL),
        ("block_number", 2, _F.TYPE_UINT64),
    ],
    "GetReceiptRequest": [
        ("transaction_hash", 1, _F.TYPE_STRING),
    ],
    "HealthRequest": [],
    "HealthReply": [
        ("chain_ok", 1, _F.TYPE_BOOL),
        ("head", 2, _F.TYPE_UINT64),
    ],
}


def _build():
    fdp = descriptor_pb2.FileDescriptorProto()
    fdp.name = "identity_chain.proto"
    fdp.package = PACKAGE
    fdp.syntax = "proto3"
    for name, fields in _MESSAGES.items():
        msg = fdp.message_type.add()
        msg.name = name
        for fname, number, ftype in fields:
            f = msg.field.add()
            f.name = fname
            f.number = number
            f.type = ftype
            f.label = _F.LABEL_OPTIONAL
    pool = descriptor_pool.DescriptorPool()
    pool.Add(fdp)
    return {name: message_factory.GetMessageClass(
        pool.FindMessageTypeByName(f"{PACKAGE}.{name}"))
        for name in _MESSAGES}


_classes = _build()

RegisterUserRequest = _classes["RegisterUserRequest"]
ChainResult = _classes["ChainResult"]
VerifyUserRequest = _classes["VerifyUserRequest"]
VerifyUserReply = _classes["VerifyUserReply"]
GetReceiptRequest = _classes["GetReceiptRequest"]
HealthRequest = _classes["HealthRequest"]
HealthReply = _classes["HealthReply"]

# rpc name -> (request class, response class)
METHODS = {
    "RegisterUser": (RegisterUserRequest, ChainResult),
    "VerifyUser": (VerifyUserRequest, VerifyUserReply),
    "GetReceipt": (GetReceiptRequest, ChainResult),
    "Health": (HealthRequest, HealthReply),
}
