from django.apps import AppConfig


class SymmetryConfig(AppConfig):
    name = 'symmetry'
    verbose_name = 'Symmetry groups'
