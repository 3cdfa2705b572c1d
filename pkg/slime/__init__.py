"""LIME and s-LIME local explanations for small black-box classifiers."""

from slime.pipeline import ExplainConfig, Explanation, Method, explain

__all__ = ["ExplainConfig", "Explanation", "Method", "explain"]
