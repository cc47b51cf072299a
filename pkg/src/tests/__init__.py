import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "besovscale.settings")
django.setup()
