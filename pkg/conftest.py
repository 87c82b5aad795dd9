import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'dipsim.settings')
django.setup()
