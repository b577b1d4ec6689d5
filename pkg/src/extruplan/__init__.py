"""Extrusion sequence and motion planning for 3D frame structures."""
from .frame import DirectedElement, FrameProblem, load_problem, save_problem
from .heuristics import make_heuristic, plan_stiffness
from .search import plan
from .stiffness import StiffnessChecker, analyze
from .validate import Plan, load_plan, save_plan, validate_plan

__all__ = ["DirectedElement", "FrameProblem", "Plan", "StiffnessChecker", "analyze", "load_plan", "load_problem",
           "make_heuristic", "plan", "plan_stiffness", "save_plan", "save_problem", "validate_plan"]
__version__ = "0.1.0"
