import numpy as np
import pytest

from crfactor import ModelParseError, parse_model, render_model

from conftest import DATA


def test_minimal_joint_file():
    model = parse_model("graph undirected\nvar A 2\njoint\n0 0.3\n1 0.7\n")
    table = model.joint()
    assert table.prob({"A": 0}) == pytest.approx(0.3)
    assert table.prob({"A": 1}) == pytest.approx(0.7)


def test_student_file():
    model = parse_model((DATA / "student.model").read_text())
    assert model.kind == "cpt"
    assert model.graph.kind == "directed"
    assert len(model.graph.nodes) == 5
    assert len(model.graph.edges) == 4
    table = model.joint()
    assert float(table.probs.sum()) == pytest.approx(1.0, abs=1e-12)
    # spot value: P(D=0, I=0, G=0, S=0, L=0) = .6 * .7 * .3 * .95 * .1
    assert table.prob({"D": 0, "I": 0, "G": 0, "S": 0, "L": 0}) == pytest.approx(
        0.6 * 0.7 * 0.3 * 0.95 * 0.1
    )


def test_malformed_edge_has_line_number():
    with pytest.raises(ModelParseError) as err:
        parse_model((DATA / "bad_edge.model").read_text())
    assert err.value.line == 3
    assert "unknown variable" in str(err.value)


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("var A 2\n", 1, "graph line"),
        ("graph undirected\nvar A 2\nvar A 2\njoint\n0 1.0\n", 3, "duplicate variable"),
        ("graph undirected\nvar A 1\njoint\n0 1.0\n", 2, "cardinality"),
        ("graph undirected\nvar A 2\njoint\n0 1.5\n", 4, "out of range"),
        ("graph undirected\nvar A 2\njoint\n0 0.3\n1 0.3\n", 3, "sum to"),
        ("graph undirected\nvar A 2\njoint\n0 0.5\n0 0.5\n", 5, "duplicate joint row"),
        ("graph undirected\nvar A 2\nbogus stuff\n", 3, "unknown directive"),
        ("graph undirected\nvar A 2\njoint\n2 1.0\n", 4, "out of range"),
        ("graph sideways\n", 1, "graph"),
        ("graph undirected\nvar A 2\ndefault A 5\njoint\n0 1.0\n", 3, "out of range"),
    ],
)
def test_parse_errors(text, line, fragment):
    with pytest.raises(ModelParseError) as err:
        parse_model(text)
    assert err.value.line == line
    assert fragment in str(err.value)


def test_whole_file_errors():
    with pytest.raises(ModelParseError, match="no distribution"):
        parse_model("graph undirected\nvar A 2\n")
    with pytest.raises(ModelParseError, match="missing cpt"):
        parse_model("graph directed\nvar A 2\nvar B 2\nedge A B\ncpt A\n0 0.5\n1 0.5\n")
    with pytest.raises(ModelParseError, match="cannot mix"):
        parse_model("graph undirected\nvar A 2\njoint\n0 1.0\npotential A\n0 1.0\n1 1.0\n")
    with pytest.raises(ModelParseError, match="not a clique"):
        parse_model(
            "graph undirected\nvar A 2\nvar B 2\npotential A B\n"
            "0 0 1.0\n0 1 1.0\n1 0 1.0\n1 1 1.0\n"
        )
    with pytest.raises(ModelParseError, match="lists 3 of 4"):
        parse_model(
            "graph undirected\nvar A 2\nvar B 2\nedge A B\npotential A B\n"
            "0 0 1.0\n0 1 1.0\n1 0 1.0\n"
        )
    with pytest.raises(ModelParseError, match="require a directed graph"):
        parse_model("graph undirected\nvar A 2\ncpt A\n0 0.5\n1 0.5\n")


def test_unlisted_joint_rows_default_to_zero():
    model = parse_model("graph undirected\nvar A 2\nvar B 2\nedge A B\njoint\n0 0 0.5\n1 1 0.5\n")
    table = model.joint()
    assert table.prob({"A": 0, "B": 1}) == 0.0
    assert not table.strictly_positive


def test_comments_and_blank_lines():
    model = parse_model(
        "# heading\n\ngraph undirected  # trailing\nvar A 2\n\n# mid\njoint\n0 0.4\n1 0.6\n"
    )
    assert model.joint().prob({"A": 0}) == pytest.approx(0.4)


def test_default_directive():
    model = parse_model(
        "graph undirected\nvar A 2\nvar B 3\nedge A B\ndefault B 2\njoint\n0 0 1.0\n"
    )
    assert model.default_assignment() == {"A": 0, "B": 2}


def test_cpt_row_sum_error_names_block_line():
    text = (
        "graph directed\nvar A 2\nvar B 2\nedge A B\n"
        "cpt A\n0 0.5\n1 0.5\n"
        "cpt B\n0 0 0.9\n0 1 0.2\n1 0 0.5\n1 1 0.5\n"
    )
    with pytest.raises(ModelParseError) as err:
        parse_model(text)
    assert "sum to" in str(err.value)
    assert err.value.line == 8  # the cpt B block line


@pytest.mark.parametrize(
    "name", ["d2.model", "student.model", "path3_gibbs.model", "cycle4_gibbs.model"]
)
def test_render_round_trip(name):
    model = parse_model((DATA / name).read_text())
    text = render_model(model)
    again = parse_model(text)
    assert again.kind == model.kind
    assert again.names == model.names
    assert again.graph.edges == model.graph.edges
    assert again.defaults == model.defaults
    assert np.allclose(again.joint().probs, model.joint().probs, rtol=1e-12, atol=1e-15)
    # canonical text is a fixed point
    assert render_model(again) == text
