import numpy as np
import pytest

from app.models.control import qubit_coherent_model, qubit_thermal_model
from app.models.fields import CurvatureField
from app.models.protocol import TWO_PI, Disk, Ellipse, Polygon, Protocol
from app.physics import cycles
from app.physics.geometry import baseline_field, coherent_field, fd_field, free_energy
from app.utils.errors import DimensionMismatch, ZeroBaseline


def _constant(value):
    return CurvatureField(lambda x, y: value * np.ones(np.broadcast(x, y).shape), CurvatureField.MODE_FD)


def _linear():
    return CurvatureField(lambda x, y: x + 2.0 * y, CurvatureField.MODE_FD)


class TestProtocols:
    def test_circle_closes(self):
        loop = Protocol.circle((1.0, 1.0), 0.5)
        assert loop.check_closure()
        np.testing.assert_allclose(loop.start, loop.end, atol=1e-12)

    def test_closed_polyline_appends_first_vertex(self):
        loop = Protocol.polyline([(0, 0), (1, 0), (1, 1)], closed=True)
        assert loop.segment_count == 3
        np.testing.assert_allclose(loop.vertices[-1], loop.vertices[0])

    def test_reversal_flips_velocity_and_orientation(self):
        loop = Protocol.circle((0.0, 0.0), 1.0)
        back = loop.reversed()
        np.testing.assert_allclose(back.path(0.3), loop.path(TWO_PI - 0.3))
        np.testing.assert_allclose(back.velocity(0.3), -loop.velocity(TWO_PI - 0.3))
        assert back.region().orientation == -1

    def test_tail_extends_the_chart(self):
        loop = Protocol.circle((1.0, 0.5), 0.3, tail=(2.0,))
        assert loop.ndim == 3
        assert np.all(loop.path(np.linspace(0, 1, 4))[:, 2] == 2.0)
        assert np.all(loop.velocity(np.linspace(0, 1, 4))[:, 2] == 0.0)

    def test_temperature_loop_is_not_planar(self):
        loop = Protocol.temperature_modulated((1.0, 0.5), 0.6, 0.3, 1.0, 0.1, 0.0)
        assert loop.ndim == 3
        assert not loop.is_planar
        with pytest.raises(ValueError):
            Protocol.temperature_modulated((1.0, 0.5), 0.6, 0.3, 0.1, 0.2, 0.0)

    def test_open_smooth_loop_is_rejected(self):
        with pytest.raises(ValueError):
            Protocol(family=Protocol.CIRCLE, closed=False)


class TestSurfaceIntegrals:
    def test_constant_density_gives_area(self):
        assert cycles.surface_integral_work(_constant(1.0), Disk((0.3, -0.2), 0.7)) == pytest.approx(np.pi * 0.49)
        assert cycles.surface_integral_work(_constant(2.0), Ellipse((0.0, 0.0), 0.5, 2.0)) == pytest.approx(
            2.0 * np.pi)

    def test_polygon_flux_follows_vertex_order(self):
        square = [(0, 0), (1, 0), (1, 1), (0, 1)]
        # integral of x + 2y over the unit square
        assert cycles.surface_integral_work(_linear(), Polygon(square)) == pytest.approx(1.5, abs=1e-10)
        assert cycles.surface_integral_work(_linear(), Polygon(square[::-1])) == pytest.approx(-1.5, abs=1e-10)

    def test_reversed_disk_negates_flux(self):
        forward = cycles.surface_integral_work(_linear(), Disk((1.0, 1.0), 0.5))
        backward = cycles.surface_integral_work(_linear(), Disk((1.0, 1.0), 0.5, orientation=-1))
        assert backward == pytest.approx(-forward)
        assert forward == pytest.approx(3.0 * np.pi * 0.25)

    def test_transposed_field_integrates_on_the_same_plane(self):
        field = coherent_field(1.0, p=1.0)
        disk = Disk((0.5, 0.8), 0.3)
        direct = cycles.surface_integral_work(field, disk)
        assert cycles.surface_integral_work(field.transposed(), disk) == pytest.approx(direct, rel=1e-12)

    def test_signed_flux_cancels_on_symmetric_disk(self):
        flux = cycles.signed_flux(coherent_field(1.0, p=1.0), Disk((1.0, 0.0), 0.5))
        assert abs(flux.net) < 1e-10
        assert flux.positive > 0
        assert flux.cancellation == pytest.approx(1.0)


class TestLineIntegrals:
    def test_stokes_agreement_for_coherent_model(self):
        model = qubit_coherent_model(1.0, 0.0)
        result = cycles.stokes_check(model, Protocol.circle((1.0, 1.0), 0.5), coherent_field(1.0, p=1.0))
        assert result.stokes_gap < 1e-6
        assert result.agrees(1e-6)
        assert result.w_line > 0

    def test_stokes_agreement_on_polygon(self):
        model = qubit_coherent_model(1.0, 0.0, analytic=True)
        loop = Protocol.polyline([(0.5, 0.5), (1.5, 0.5), (1.5, 1.2), (0.5, 1.2)], closed=True)
        result = cycles.stokes_check(model, loop, coherent_field(1.0, p=1.0), tolerance=1e-9)
        assert result.stokes_gap < 1e-6

    def test_reversed_loop_negates_work(self):
        model = qubit_coherent_model(1.0, 0.0, analytic=True)
        loop = Protocol.ellipse((0.5, 1.0), 0.4, 0.3)
        forward = cycles.line_integral_work(model, loop)
        assert cycles.line_integral_work(model, loop.reversed()) == pytest.approx(-forward, rel=1e-10)

    def test_symmetric_loop_has_no_coherent_work(self):
        model = qubit_coherent_model(1.0, 0.0)
        assert abs(cycles.line_integral_work(model, Protocol.circle((1.0, 0.0), 0.5))) < 1e-10

    def test_thermal_loop_work_vanishes(self):
        model = qubit_thermal_model(beta=1.0)
        assert abs(cycles.line_integral_work(model, Protocol.circle((1.0, 0.5), 0.5))) < 1e-8

    def test_thermal_open_path_gives_free_energy_difference(self):
        beta = 1.0
        model = qubit_thermal_model(beta=beta)
        path = Protocol.polyline([(0.5, 0.2), (1.5, 0.2), (1.5, 1.0)])
        expected = free_energy(1.5, 1.0, beta) - free_energy(0.5, 0.2, beta)
        assert cycles.line_integral_work(model, path) == pytest.approx(expected, abs=1e-8)

    def test_line_details_report_convergence(self):
        model = qubit_coherent_model(1.0, 0.0, analytic=True)
        line = cycles.line_integral_details(model, Protocol.circle((1.0, 1.0), 0.5), n=64)
        assert line.n_nodes >= 128
        assert line.residual <= 1e-8 * max(1.0, abs(line.value))
        assert line.trace[-1] == pytest.approx(line.value)

    def test_line_integral_needs_enough_nodes(self):
        with pytest.raises(ValueError):
            cycles.line_integral_work(qubit_thermal_model(beta=1.0), Protocol.circle((1, 1), 0.5), n=8)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            cycles.line_integral_work(qubit_thermal_model(), Protocol.circle((1.0, 1.0), 0.5))

    def test_stokes_refuses_baseline_field(self):
        model = qubit_thermal_model(beta=1.0)
        with pytest.raises(ValueError):
            cycles.stokes_check(model, Protocol.circle((1.0, 1.0), 0.5), baseline_field(1.0))

    def test_stokes_with_zero_field_for_thermal_model(self):
        model = qubit_thermal_model(beta=2.0)
        result = cycles.stokes_check(model, Protocol.circle((0.5, 0.5), 0.3), CurvatureField.zero())
        assert result.w_surface == 0.0
        assert result.stokes_gap < 1e-8

    def test_fd_field_stokes_with_thermal_bias(self):
        model = qubit_coherent_model(analytic=True, beta=1.0, gamma=1.0)
        loop = Protocol.circle((1.0, 1.0), 0.3)
        w_line = cycles.line_integral_work(model, loop, tolerance=1e-9)
        w_surface = cycles.surface_integral_work(fd_field(model), loop.region(), radial=16, angular=32,
                                                 tolerance=1e-5)
        assert w_surface == pytest.approx(w_line, rel=1e-4)


class TestFirstLaw:
    def test_steps_balance_and_loop_closes(self):
        model = qubit_coherent_model(1.0, 0.0, analytic=True)
        loop = Protocol.circle((1.0, 1.0), 0.5)
        trace = cycles.first_law_trace(model, loop, n=1024)
        assert trace.max_step_residual < 1e-12
        assert abs(trace.total_u) < 1e-12
        assert trace.total_w == pytest.approx(cycles.line_integral_work(model, loop), rel=1e-3)
        assert trace.total_q == pytest.approx(-trace.total_w, abs=1e-12)


class TestSweeps:
    def test_baseline_total_flux(self):
        for beta in (1.0, 2.0, 4.0):
            assert beta * cycles.total_baseline_flux(beta) == pytest.approx(TWO_PI * np.log(2.0), rel=1e-6)

    def test_radius_sweep_saturates(self):
        sweep = cycles.radius_sweep(1.0, np.linspace(0.5, 20.0, 12))
        assert np.all(np.diff(sweep.normalized) > 0)
        assert sweep.normalized[-1] == pytest.approx(1.0, abs=1e-4)
        assert sweep.saturation_radius(0.9) is not None

    def test_radius_sweep_rejects_unsorted_radii(self):
        with pytest.raises(ValueError):
            cycles.radius_sweep(1.0, [1.0, 0.5])

    def test_fit_sinusoid_recovers_parameters(self):
        phases = TWO_PI * np.arange(12) / 12
        w0, amplitude, delta, residual = cycles.fit_sinusoid(phases, 0.3 + 0.2 * np.cos(phases + 0.4))
        assert (w0, amplitude, delta) == pytest.approx((0.3, 0.2, 0.4))
        assert residual < 1e-12

    def test_phase_sweep_without_modulation_is_flat(self):
        sweep = cycles.phase_sweep((1.0, 0.5), 0.6, 0.3, 1.0, 0.0, TWO_PI * np.arange(4) / 4, n=64)
        assert np.max(np.abs(sweep.work)) < 1e-8

    def test_phase_sweep_with_modulation_depends_on_phase(self):
        sweep = cycles.phase_sweep((1.0, 0.5), 0.6, 0.3, 1.0, 0.05, TWO_PI * np.arange(6) / 6, n=64)
        assert sweep.amplitude > 1e-4
        assert sweep.residual < 0.02 * sweep.amplitude

    def test_phase_sweep_harmonics_shrink_with_the_modulation(self):
        phases = TWO_PI * np.arange(6) / 6
        weak = cycles.phase_sweep((1.0, 0.5), 0.6, 0.3, 1.0, 0.05, phases, n=64)
        strong = cycles.phase_sweep((1.0, 0.5), 0.6, 0.3, 1.0, 0.2, phases, n=64)
        assert strong.amplitude > 2.0 * weak.amplitude
        assert weak.residual / weak.amplitude < 0.5 * strong.residual / strong.amplitude

    def test_phase_sweep_on_a_constant_splitting_loop_vanishes(self):
        sweep = cycles.phase_sweep((0.0, 0.0), 1.0, 1.0, 1.0, 0.2, TWO_PI * np.arange(6) / 6, n=64)
        assert np.max(np.abs(sweep.work)) < 1e-8
        assert sweep.amplitude < 1e-8


class TestEta:
    @pytest.mark.parametrize("g0", [0.5, 1.0, 1.5])
    def test_small_cycle_limit(self, g0):
        beta, gamma, omega0 = 1.0, 1.0, 0.5
        report = cycles.eta_geom(Disk((omega0, g0), 0.05), coherent_field(gamma, beta=beta), baseline_field(beta))
        assert report.eta == pytest.approx(cycles.small_cycle_eta(omega0, g0, gamma, beta), rel=0.02)
        assert report.local_eta == pytest.approx(cycles.small_cycle_eta(omega0, g0, gamma, beta), rel=1e-12)

    def test_eta_sign_follows_g(self):
        coherent, baseline = coherent_field(1.0, beta=1.0), baseline_field(1.0)
        assert cycles.eta_geom(Disk((0.5, -1.0), 0.1), coherent, baseline).eta < 0

    def test_eta_vanishes_on_symmetric_loop(self):
        report = cycles.eta_geom(Protocol.circle((1.0, 0.0), 0.5), coherent_field(1.0, beta=1.0), baseline_field(1.0))
        assert abs(report.eta) < 1e-10

    def test_zero_baseline_is_reported(self):
        with pytest.raises(ZeroBaseline):
            cycles.local_eta(0.0, 0.0, coherent_field(1.0, p=1.0), CurvatureField.zero())


class TestFiniteRate:
    def test_excess_work_scales_with_inverse_period(self):
        model = qubit_coherent_model(1.0, 0.2, analytic=True)
        short, long_ = cycles.finite_rate_sweep(model, Protocol.circle((1.0, 1.0), 0.5), [10.0, 20.0], n=64)
        assert short.w_excess == pytest.approx(2.0 * long_.w_excess)
        assert short.metric_length > 0
        assert short.w_geometric == long_.w_geometric
        assert short.ratio == pytest.approx(long_.ratio)

    def test_four_point_sweep_approaches_the_geometric_work(self):
        model = qubit_coherent_model(1.0, 0.2, analytic=True)
        periods = [10.0, 20.0, 40.0, 80.0]
        results = cycles.finite_rate_sweep(model, Protocol.circle((1.0, 1.0), 0.5), periods, n=64)
        ratios = np.array([r.ratio for r in results])
        gaps = np.array([abs(r.w_total - r.w_geometric) for r in results])

        assert np.all(np.isfinite(ratios)) and ratios[0] != 0.0
        np.testing.assert_allclose(ratios, ratios[0], rtol=1e-12)
        np.testing.assert_allclose([r.w_excess * r.period for r in results], results[0].w_excess * periods[0],
                                   rtol=1e-12)
        assert all(r.metric_length > 0 for r in results)
        assert np.all(np.diff(gaps) < 0)
        assert gaps[-1] == pytest.approx(gaps[0] / 8.0)
        assert results[-1].w_total == pytest.approx(results[-1].w_geometric, abs=gaps[0])

    def test_finite_rate_needs_a_loop(self):
        model = qubit_thermal_model(beta=1.0)
        with pytest.raises(ValueError):
            cycles.finite_rate_work(model, Protocol.polyline([(0, 1), (1, 1)]), 10.0)
