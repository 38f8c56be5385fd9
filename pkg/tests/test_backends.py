from __future__ import annotations

import struct

import pytest
from hypothesis import given, strategies as st

from abi_bridge import simcore
from abi_bridge.abi_model import lookup_predefined
from abi_bridge.abi_model.handles import HandleKind, datatype_fixed_size
from abi_bridge.backend_api import (
    INT_STYLE,
    TOKEN_STYLE,
    BackendDescriptor,
    NativeError,
    StatusFields,
    backend_names,
    backend_registry_get,
    default_backend_name,
)
from abi_bridge.backend_int import NATIVE_HANDLES as INT_HANDLES
from abi_bridge.backend_int import USER_HANDLE_BASE, int_native_type_size, int_status_pack, int_status_unpack
from abi_bridge.backend_token import TOKEN_BASE, TokenTable, token_status_pack, token_status_unpack

LAYOUTS = [(INT_STYLE, int_status_pack, int_status_unpack), (TOKEN_STYLE, token_status_pack, token_status_unpack)]


def opened(name: str, nranks: int = 1):
    api = backend_registry_get(name).open()
    api.init(simcore.world_create(nranks), 0)
    return api


def test_registry_is_stable():
    for name in backend_names():
        assert backend_registry_get(name) is backend_registry_get(name)
        assert backend_registry_get(name).name == name


def test_registry_rejects_unknown():
    with pytest.raises(KeyError, match="unknown backend"):
        backend_registry_get("nope")


def test_default_backend(monkeypatch):
    monkeypatch.delenv("ABI_BRIDGE_BACKEND", raising=False)
    assert default_backend_name() == "int"
    monkeypatch.setenv("ABI_BRIDGE_BACKEND", "token")
    assert default_backend_name() == "token" and default_backend_name("int") == "int"


def test_layout_sizes():
    assert INT_STYLE.size == 20
    assert TOKEN_STYLE.size == 24
    assert [n for n, _, _ in INT_STYLE.slots()][2:] == ["MPI_SOURCE", "MPI_TAG", "MPI_ERROR"]
    assert [n for n, _, _ in TOKEN_STYLE.slots()][:3] == ["MPI_SOURCE", "MPI_TAG", "MPI_ERROR"]


@pytest.mark.parametrize("layout,pack,unpack", LAYOUTS, ids=["int", "token"])
def test_status_examples(layout, pack, unpack):
    for f in (
        StatusFields(2, 9, 0, 16, False),
        StatusFields(2, 9, 0, 2**40, False),
        StatusFields(-1, -1, 14, 0, True),
        StatusFields(0, 0, 0, 2**40, True),
    ):
        raw = pack(f)
        assert len(raw) == layout.size and unpack(raw) == f


def test_int_count_split_matches_bit_assembly():
    count = 2**40 + 0x1234_5678
    raw = int_status_pack(StatusFields(1, 2, 0, count, True))
    lo, hi, src, tag, err = struct.unpack("<5i", raw)
    assert lo & 0xFFFFFFFF == count & 0xFFFFFFFF
    assert (hi & 0xFFFFFFFF) >> 1 == count >> 32 and hi & 1 == 1
    assert (src, tag, err) == (1, 2, 0)


def test_token_count_is_word_sized():
    raw = token_status_pack(StatusFields(1, 2, 3, 2**40, True))
    src, tag, err, cancelled, ucount = struct.unpack("<4iQ", raw)
    assert (src, tag, err, cancelled, ucount) == (1, 2, 3, 1, 2**40)


@given(
    st.integers(-(2**31), 2**31 - 1),
    st.integers(-(2**31), 2**31 - 1),
    st.integers(-(2**31), 2**31 - 1),
    st.integers(0, 2**63 - 1),
    st.booleans(),
)
def test_status_round_trip_property(src, tag, err, count, cancelled):
    f = StatusFields(src, tag, err, count, cancelled)
    for _, pack, unpack in LAYOUTS:
        assert unpack(pack(f)) == f


@pytest.mark.parametrize("layout", [INT_STYLE, TOKEN_STYLE])
def test_count_overflow_rejected(layout):
    with pytest.raises(OverflowError):
        layout.pack(StatusFields(0, 0, 0, 2**63))


@pytest.mark.parametrize("value,size", [(0x4C000405, 4), (0x4C000101, 1), (0x4C00080B, 8)])
def test_int_size_macro_examples(value, size):
    assert int_native_type_size(value) == size


def test_int_size_macro_for_every_builtin():
    api = opened("int")
    world = api.world
    for name, value in INT_HANDLES[HandleKind.DATATYPE].items():
        if name == "MPI_DATATYPE_NULL":
            continue
        assert int_native_type_size(value) == api.type_size(value), name
        assert api.type_size(value) == world.type_size(api._ref(HandleKind.DATATYPE, value)), name


def test_int_user_handles_do_not_collide():
    api = opened("int")
    byte = INT_HANDLES[HandleKind.DATATYPE]["MPI_BYTE"]
    predefined = {v for names in INT_HANDLES.values() for v in names.values()}
    seen = set()
    for _ in range(10_000):
        h = api.type_contiguous(1, byte)
        assert h >= USER_HANDLE_BASE and h not in predefined and h not in seen
        seen.add(h)


def test_int_user_type_size_falls_back_to_lookup():
    api = opened("int")
    t = api.type_contiguous(3, INT_HANDLES[HandleKind.DATATYPE]["MPI_INT32_T"])
    assert int_native_type_size(t) != 12 and api.type_size(t) == 12


def test_token_table_invariants():
    table = TokenTable()
    tokens = [table.create(object()) for _ in range(1000)]
    assert len(set(tokens)) == 1000
    assert all(t >= 1024 and t != 0 for t in tokens)
    assert all(table.resolve(t) is not None for t in tokens)
    table.release(tokens[0])
    assert table.resolve(tokens[0]) is None
    assert table.create(object()) not in tokens


def test_token_predefined_are_outside_standard_region():
    api = opened("token")
    live = api.tokens
    for kind, names in backend_registry_get("token").api.NATIVE_HANDLES.items():
        for name, token in names.items():
            assert token >= TOKEN_BASE and live.resolve(token) is not None, name


def test_token_type_size_matches_standard_encoding():
    desc = backend_registry_get("token").descriptor
    api = opened("token")
    checked = 0
    for std, native in desc.predefined_map[HandleKind.DATATYPE].items():
        size = datatype_fixed_size(std)
        if size is not None:
            assert api.type_size(native) == size
            checked += 1
    assert checked >= 10


def test_token_type_size_of_derived_and_freed():
    api = opened("token")
    i32 = api.NATIVE_HANDLES[HandleKind.DATATYPE]["MPI_INT32_T"]
    t = api.type_contiguous(3, i32)
    assert api.type_size(t) == 3 * api.type_size(i32) == 12
    api.type_free(t)
    with pytest.raises(NativeError) as exc:
        api.type_size(t)
    assert exc.value.code == api.NATIVE_ERRORS["MPI_ERR_TYPE"]


@pytest.mark.parametrize("name", ["int", "token"])
def test_descriptor_is_bijective(name):
    desc = backend_registry_get(name).descriptor
    assert desc.error_map[0] == 0 and desc.error_to_std()[0] == 0
    assert len(set(desc.error_map.values())) == len(desc.error_map)
    for kind, m in desc.predefined_map.items():
        assert len(set(m.values())) == len(m)
        for std, native in m.items():
            assert desc.impl_to_std(kind, native) == std and desc.std_to_impl(kind, std) == native


def test_descriptor_joins_by_name():
    desc = backend_registry_get("int").descriptor
    std = lookup_predefined("MPI_COMM_WORLD")
    assert desc.predefined_map[HandleKind.COMM][std] == INT_HANDLES[HandleKind.COMM]["MPI_COMM_WORLD"]


def test_descriptor_rejects_non_injective():
    with pytest.raises(ValueError):
        BackendDescriptor.build("bad", INT_STYLE, {}, {"MPI_SUCCESS": 0, "MPI_ERR_TYPE": 0}, {})


def test_descriptor_requires_success_zero():
    with pytest.raises(ValueError):
        BackendDescriptor.build("bad", INT_STYLE, {}, {"MPI_SUCCESS": 1}, {})


@pytest.mark.parametrize("name", ["int", "token"])
def test_backends_differ_in_native_surface(name):
    other = {"int": "token", "token": "int"}[name]
    a, b = backend_registry_get(name).descriptor, backend_registry_get(other).descriptor
    world = lookup_predefined("MPI_COMM_WORLD")
    assert a.predefined_map[HandleKind.COMM][world] != b.predefined_map[HandleKind.COMM][world]
    assert a.status_layout.size != b.status_layout.size


@pytest.mark.parametrize("name", ["int", "token"])
def test_calls_require_init(name):
    api = backend_registry_get(name).open()
    with pytest.raises(NativeError):
        api.comm_size(api.NATIVE_HANDLES[HandleKind.COMM]["MPI_COMM_WORLD"])


@pytest.mark.parametrize("name", ["int", "token"])
def test_error_string_covers_native_codes(name):
    api = opened(name)
    for code in api.NATIVE_ERRORS.values():
        assert api.error_string(code)
    with pytest.raises(NativeError):
        api.error_string(9999)


@pytest.mark.parametrize("name", ["int", "token"])
def test_live_user_handles_tracks_frees(name):
    api = opened(name)
    comm = api.comm_dup(api.NATIVE_HANDLES[HandleKind.COMM]["MPI_COMM_WORLD"])
    assert comm in api.live_user_handles()[HandleKind.COMM]
    api.comm_free(comm)
    assert not any(api.live_user_handles().values())
