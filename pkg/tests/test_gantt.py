from crudesched import Evaluator, plan_genome
from crudesched.gantt import render_svg, write_svg


def make_traj(inst):
    g = plan_genome(
        inst,
        receiving={2: {1: [(3, 20.0)]}},
        charging={1: {1: [(1, 5.0)]}, 2: {1: [(1, 5.0)]}, 3: {1: [(2, 5.0)]}},
    )
    return Evaluator(inst).simulate(g)


def test_svg_structure(tiny_instance):
    svg = render_svg(make_traj(tiny_instance))
    assert svg.startswith("<svg ")
    assert svg.rstrip().endswith("</svg>")
    assert "tank 1" in svg and "tank 3" in svg
    assert "cdu 1" in svg
    assert ">U1<" in svg  # charge bar label
    assert ">V1<" in svg  # vessel receipt marker
    assert 'stroke="#cc0000"' in svg  # the period-3 changeover tick


def test_svg_is_deterministic(tiny_instance):
    a = render_svg(make_traj(tiny_instance))
    b = render_svg(make_traj(tiny_instance))
    assert a == b


def test_write_svg(tmp_path, tiny_instance):
    path = tmp_path / "chart.svg"
    write_svg(make_traj(tiny_instance), path)
    data = path.read_bytes()
    assert data == render_svg(make_traj(tiny_instance)).encode()
