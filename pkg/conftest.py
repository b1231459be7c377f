# SPDX-License-Identifier: MIT

import os
import sys

# scripts and packages live at the repository root
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
