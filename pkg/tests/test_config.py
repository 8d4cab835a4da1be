import pytest

from qudcomp.config import ENV_VAR, Tolerances, get_tolerances, resolve


def test_defaults():
    t = Tolerances()
    assert t.csd_tol == 1e-9
    assert t.norm_tol == 1e-10
    assert t.dedup_tol == 1e-8


def test_env_override_key_value(monkeypatch):
    monkeypatch.setenv(ENV_VAR, "csd_tol=1e-7, norm_tol=1e-9")
    t = get_tolerances()
    assert t.csd_tol == 1e-7
    assert t.norm_tol == 1e-9
    assert t.lower_tol == Tolerances().lower_tol


def test_env_override_json(monkeypatch):
    monkeypatch.setenv(ENV_VAR, '{"balance_threshold": 0.6}')
    assert get_tolerances().balance_threshold == 0.6


def test_env_unknown_key(monkeypatch):
    monkeypatch.setenv(ENV_VAR, "bogus=1")
    with pytest.raises(ValueError, match="bogus"):
        get_tolerances()


def test_resolve_prefers_explicit():
    t = Tolerances().replace(csd_tol=1e-3)
    assert resolve(t) is t
