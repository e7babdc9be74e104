import numpy as np
import pytest

from aste_grid import autodiff as ad
from aste_grid.embed import UNK, compose_double, init_toy, load_pretrained, lookup
from aste_grid.errors import DimensionError


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_two_lines(tmp_path):
    t = load_pretrained(write(tmp_path, "e.txt", "good 1 2 3\nfood 4 5 6\n"), 3)
    assert (t.V, t.d) == (2, 3)
    assert not t.trainable


def test_wrong_dimension(tmp_path):
    p = write(tmp_path, "e.txt", "good 1 2 3\nfood 4 5\n")
    with pytest.raises(DimensionError) as exc:
        load_pretrained(p, 3)
    assert exc.value.line == 2


def test_lookup_returns_file_values(tmp_path):
    rng = np.random.default_rng(3)
    words = [f"w{i}" for i in range(10)]
    lines = []
    for w in words:
        vals = rng.normal(size=4)
        lines.append(w + " " + " ".join(repr(float(v)) for v in vals))
    p = write(tmp_path, "glove.txt", "\n".join(lines) + "\n")
    t = load_pretrained(p, 4)
    out = lookup(t, ["w7", "w0", "w7"]).data
    # oracle: parse the file text directly
    parsed = {ln.split()[0]: [float(x) for x in ln.split()[1:]] for ln in p.read_text().splitlines()}
    np.testing.assert_array_equal(out, np.array([parsed["w7"], parsed["w0"], parsed["w7"]]))


def test_duplicate_first_wins(tmp_path, caplog):
    t = load_pretrained(write(tmp_path, "e.txt", "a 1 1\nb 2 2\na 3 3\n"), 2)
    assert t.V == 2
    np.testing.assert_array_equal(lookup(t, ["a"]).data, [[1.0, 1.0]])
    assert "duplicate" in caplog.text


def test_lowercase_fallback(tmp_path):
    t = load_pretrained(write(tmp_path, "e.txt", "food 1 2\nFood 3 4\nwine 5 6\n"), 2)
    np.testing.assert_array_equal(lookup(t, ["Food", "food", "Wine"]).data,
                                  [[3, 4], [1, 2], [5, 6]])


def test_compose_double():
    general = init_toy(["a", "b"], 3, 0)
    general.trainable = False
    domain = init_toy(["b", "c"], 2, 1)
    domain.trainable = False
    both = compose_double(general, domain)
    assert both.d == 5
    b = lookup(both, ["b"]).data[0]
    np.testing.assert_array_equal(b, np.concatenate([general.matrix[general.vocab["b"]],
                                                     domain.matrix[domain.vocab["b"]]]))
    a = lookup(both, ["a"]).data[0]
    np.testing.assert_array_equal(a[3:], np.zeros(2))
    assert set(both.vocab) == {UNK, "a", "b", "c"}


def test_full_size_double_dimension():
    g = init_toy(["x"], 300, 0)
    d = init_toy(["x"], 100, 0)
    assert compose_double(g, d).d == 400


def test_toy_table():
    a = init_toy(["a", "b", "c", "d", "e"], 8, seed=4)
    b = init_toy(["a", "b", "c", "d", "e"], 8, seed=4)
    np.testing.assert_array_equal(a.matrix, b.matrix)
    assert a.V == 6 and a.trainable
    assert np.all(np.abs(a.matrix) <= 0.1)


def test_oov_policies():
    toy = init_toy(["a"], 3, 0)
    out = lookup(toy, ["zzz", "a"]).data
    np.testing.assert_array_equal(out[0], toy.matrix[toy.vocab[UNK]])
    frozen = init_toy(["a"], 3, 0)
    frozen.trainable = False
    out = lookup(frozen, ["zzz", "a"]).data
    np.testing.assert_array_equal(out[0], np.zeros(3))
    assert out.shape == (2, 3)


def test_toy_gradient_touches_only_used_rows():
    toy = init_toy(["a", "b", "c"], 3, 0)
    leaf = ad.Tensor(toy.matrix, requires_grad=True)
    ad.sum(lookup(toy, ["b", "zzz"], leaf)).backward()
    touched = np.flatnonzero(np.abs(leaf.grad).sum(axis=1))
    assert set(touched) == {toy.vocab["b"], toy.vocab[UNK]}


def test_frozen_table_is_constant():
    frozen = init_toy(["a"], 3, 0)
    frozen.trainable = False
    out = lookup(frozen, ["a"], ad.Tensor(frozen.matrix, requires_grad=True))
    assert not out.requires_grad
