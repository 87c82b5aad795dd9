from django.apps import AppConfig


class PosteriorConfig(AppConfig):
    name = 'posterior'
    verbose_name = 'Dirichlet invariant process posteriors'
