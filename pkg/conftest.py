import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'nde_scattering.settings')
django.setup()
