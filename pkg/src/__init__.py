"""
EHRJoint

Joint modeling of visit, observation and biomarker processes in electronic
health records, with the comparator estimators and a simulation harness.
"""

__version__ = '1.0.0'

from src.estimators import METHODS, create_estimator
from src.joint_estimators import fit_ehrjoint

__all__ = ['METHODS', 'create_estimator', 'fit_ehrjoint']
