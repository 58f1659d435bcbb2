"""Knowledge-graph retrieval, validation and error analysis for
Terraform code generation."""

__version__ = "0.1.0"
