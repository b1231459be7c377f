# SPDX-License-Identifier: MIT