# Models package initialization
from app.models.operators import BlochVector, DensityMatrix, HermitianOperator, LindbladTerm, Superoperator
from app.models.control import ControlModel
from app.models.fields import CurvatureField, DissipationMetric, WorkOneForm
from app.models.protocol import Disk, Ellipse, Polygon, Protocol
from app.models.results import CycleResult, EtaReport, FirstLawTrace, PhaseSweep, RadiusSweep
from app.models.stochastic import ControlSDE, JointDensity, TiltedField, WorkEnsemble, WorkTrajectory
from app.models.table import ResultTable

# Export all models
__all__ = [
    'BlochVector', 'DensityMatrix', 'HermitianOperator', 'LindbladTerm', 'Superoperator',
    'ControlModel', 'CurvatureField', 'DissipationMetric', 'WorkOneForm',
    'Disk', 'Ellipse', 'Polygon', 'Protocol',
    'CycleResult', 'EtaReport', 'FirstLawTrace', 'PhaseSweep', 'RadiusSweep',
    'ControlSDE', 'JointDensity', 'TiltedField', 'WorkEnsemble', 'WorkTrajectory',
    'ResultTable',
]
