"""Scalar fields derived from a flow field: magnitude, orientation, and
optical strain."""

import numpy as np

from .core import FlowField, ShapeError

__all__ = ["polar_decompose", "strain_magnitude"]


def polar_decompose(flow: FlowField):
    """Magnitude and orientation of each flow vector.

    Returns
    -------
    magnitude : sqrt(u^2 + v^2), >= 0
    orientation : four-quadrant angle of (u, v) in [-pi, pi]; exactly 0
        wherever the magnitude is 0 so degenerate vectors land in a
        deterministic bin
    """
    magnitude = np.hypot(flow.u, flow.v)
    orientation = np.arctan2(flow.v, flow.u)
    orientation = np.where(magnitude == 0.0, 0.0, orientation)
    return magnitude, orientation


def strain_magnitude(flow: FlowField):
    """Frobenius magnitude of the infinitesimal strain tensor.

    The strain tensor is the symmetric part of the flow Jacobian; with
    normal components u_x, v_y and shear components (u_y + v_x) / 2 the
    magnitude is sqrt(u_x^2 + v_y^2 + 2 * ((u_y + v_x) / 2)^2).  Spatial
    derivatives use central differences in the interior and one-sided
    differences at the borders, with unit pixel spacing.
    """
    if flow.height < 2 or flow.width < 2:
        raise ShapeError("strain needs a field of at least 2x2 samples, got "
                         "%dx%d" % (flow.height, flow.width))
    u_y, u_x = np.gradient(flow.u)
    v_y, v_x = np.gradient(flow.v)
    shear = 0.5 * (u_y + v_x)
    return np.sqrt(u_x * u_x + v_y * v_y + 2.0 * (shear * shear))
