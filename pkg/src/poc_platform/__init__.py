"""Point-of-care sensing, FHIR encoding, and attribute-based secure sharing."""

__version__ = "0.1.0"
