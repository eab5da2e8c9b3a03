from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from acc_sysid.errors import InvalidArgumentError, SingularFrequencyError
from acc_sysid.model import CthpParams
from acc_sysid.stability import (
    DEFAULT_OMEGA_GRID,
    freq_response_magnitude,
    l2_condition,
    linf_condition,
    stability_report,
)

TABLE_DUKF = [(0.1987, 0.1294, 1.1639), (0.1454, 0.1809, 1.1223), (0.2134, 0.1849, 1.1305)]
TABLE_LS = [(0.0062, -0.1143, 1.2801), (0.0042, 0.0969, 1.2750), (0.0125, 0.0819, 1.2946)]

pos = st.floats(0.001, 3.0)


def _h_complex(a, b, tau, w):
    # speed-to-speed transfer function evaluated on the imaginary axis
    s = 1j * np.asarray(w, dtype=float)
    return (b * s + a) / (s * s + (a * tau + b) * s + a)


def _margins_exact(a, b, tau):
    a, b, tau = F(str(a)), F(str(b)), F(str(tau))
    return a * a * tau * tau + 2 * a * b * tau - 2 * a, (a * tau + b) ** 2 - 4 * a


def test_margin_examples():
    l2, linf = _margins_exact(0.1987, 0.1294, 1.1639)
    assert l2_condition(CthpParams(0.1987, 0.1294, 1.1639)) == pytest.approx(float(l2), abs=1e-15)
    assert linf_condition(CthpParams(0.1987, 0.1294, 1.1639)) == pytest.approx(float(linf), abs=1e-15)
    assert round(float(l2), 4) == -0.2841
    assert round(float(linf), 4) == -0.6647
    assert l2_condition(CthpParams(0.1, 0.2, 1.2)) == pytest.approx(-0.1376, abs=1e-15)
    assert linf_condition(CthpParams(0.1, 0.2, 1.2)) == pytest.approx(-0.2976, abs=1e-15)
    assert l2_condition(CthpParams(0.0, 0.7, 2.5)) == 0.0
    assert linf_condition(CthpParams(0.0, 2.0, 1.3)) == 4.0


def test_magnitude_matches_complex_oracle():
    w = np.logspace(-3, 3, 500)
    for a, b, tau in TABLE_DUKF + TABLE_LS + [(0.1, 0.2, 1.2), (1.0, 0.5, 2.0)]:
        got = freq_response_magnitude(CthpParams(a, b, tau), w)
        np.testing.assert_allclose(got, np.abs(_h_complex(a, b, tau, w)), rtol=1e-12)


def test_magnitude_examples():
    p = CthpParams(*TABLE_DUKF[0])
    assert freq_response_magnitude(p, 0.0) == 1.0
    assert freq_response_magnitude(p, 0.5) > 1.0
    assert freq_response_magnitude(p, 100.0) < 0.05
    assert isinstance(freq_response_magnitude(p, 0.5), float)


def test_singular_frequency():
    # with alpha = 0 the denominator is w^2 (w^2 + beta^2), zero at w = 0
    with pytest.raises(SingularFrequencyError):
        freq_response_magnitude(CthpParams(0.0, 0.3, 1.0), 0.0)


def test_report_fields_and_verdicts():
    rep = stability_report(CthpParams(*TABLE_DUKF[0]))
    assert not rep.l2_stable and not rep.linf_stable
    assert rep.peak_gain > 1.0
    assert rep.peak_omega in DEFAULT_OMEGA_GRID
    assert rep.beta_sq_minus_2alpha == pytest.approx(0.1294 ** 2 - 2 * 0.1987, abs=1e-15)
    d = rep.to_dict()
    assert set(d) == {"l2_margin", "linf_margin", "l2_stable", "linf_stable",
                      "beta_sq_minus_2alpha", "peak_gain", "peak_omega"}


@pytest.mark.parametrize("triple", TABLE_DUKF + TABLE_LS)
def test_reference_triples_are_string_unstable(triple):
    rep = stability_report(CthpParams(*triple))
    assert (rep.l2_stable, rep.linf_stable) == (False, False)


def test_boundary_counts_as_stable():
    rep = stability_report(CthpParams(0.0, 0.7, 2.5), omega_grid=[0.1, 1.0])
    assert rep.l2_margin == 0.0 and rep.l2_stable


def test_report_rejects_bad_grid():
    with pytest.raises(InvalidArgumentError):
        stability_report(CthpParams(0.1, 0.2, 1.2), omega_grid=[])
    with pytest.raises(InvalidArgumentError):
        stability_report(CthpParams(0.1, 0.2, 1.2), omega_grid=[1.0, 0.5])


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-3, 3))
def test_margin_difference_identity(a, b, tau):
    # expanding both margins: linf - l2 = beta^2 - 2 alpha
    p = CthpParams(a, b, tau)
    assert linf_condition(p) - l2_condition(p) == pytest.approx(b * b - 2 * a, abs=1e-12)


@given(pos)
def test_unit_dc_gain(a):
    assert freq_response_magnitude(CthpParams(a, 0.3, 1.1), 0.0) == 1.0


@given(st.floats(0.01, 1.0), st.floats(0.0, 1.0), st.floats(0.1, 5.0))
def test_l2_margin_bounds_peak_gain(a, b, tau):
    p = CthpParams(a, b, tau)
    if l2_condition(p) >= 0:
        assert stability_report(p).peak_gain <= 1.0 + 1e-9


@given(st.floats(0.01, 1.0), st.floats(0.0, 1.0), st.floats(0.1, 5.0), st.floats(0.01, 2.0))
def test_l2_margin_increases_with_headway(a, b, tau, dtau):
    assert l2_condition(CthpParams(a, b, tau + dtau)) > l2_condition(CthpParams(a, b, tau))
