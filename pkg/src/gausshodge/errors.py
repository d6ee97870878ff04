"""Exception hierarchy shared by all modules."""


class GaussHodgeError(Exception):
    """Base class for every error raised by this package."""


# mesh
class MeshError(GaussHodgeError):
    pass


class ParseError(MeshError):
    pass


class NonManifold(MeshError):
    pass


class NonOrientable(MeshError):
    pass


class DegenerateTriangle(MeshError):
    pass


class TopologyError(MeshError):
    pass


class EmptyResult(MeshError):
    pass


# geometry
class GeometryError(GaussHodgeError):
    pass


class ShootingFailed(GeometryError):
    pass


class DegenerateRing(GeometryError):
    pass


class MissingCurvature(GeometryError):
    pass


# weighted DEC
class NonPositiveMass(GaussHodgeError):
    pass


class SolveFailed(GaussHodgeError):
    pass


class UnboundedSupport(GaussHodgeError):
    pass


# homology
class NoPath(GaussHodgeError):
    pass


class AmbiguousEnd(GaussHodgeError):
    pass


class MeshMismatch(GaussHodgeError):
    pass


class NotClosed(GaussHodgeError):
    pass


# spectra
class EigenFailed(GaussHodgeError):
    pass


class FactorizationBreakdown(GaussHodgeError):
    pass


class Unstabilized(GaussHodgeError):
    pass


class NotHarmonic(GaussHodgeError):
    pass


class EmptyKernel(GaussHodgeError):
    pass
