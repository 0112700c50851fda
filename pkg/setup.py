#!/usr/bin/env python3
"""
Setup configuration for Rank Collapse Lab
Makes the project installable as a package and provides the rank-lab command.
"""

from setuptools import setup, find_packages
from pathlib import Path

# Read README for long description
README_PATH = Path(__file__).parent / "README.md"
long_description = README_PATH.read_text(encoding="utf-8") if README_PATH.exists() else ""

# Read requirements from config directory
REQUIREMENTS_PATH = Path(__file__).parent / "config" / "requirements.txt"
install_requires = []
if REQUIREMENTS_PATH.exists():
    with open(REQUIREMENTS_PATH, "r", encoding="utf-8") as f:
        install_requires = [
            line.strip()
            for line in f.readlines()
            if line.strip() and not line.startswith("#")
        ]

extras_require = {}

# Development dependencies
DEV_REQUIREMENTS_PATH = Path(__file__).parent / "config" / "requirements_dev.txt"
if DEV_REQUIREMENTS_PATH.exists():
    with open(DEV_REQUIREMENTS_PATH, "r", encoding="utf-8") as f:
        extras_require["dev"] = [
            line.strip()
            for line in f.readlines()
            if line.strip() and not line.startswith("#")
        ]

setup(
    name="rank-collapse-lab",
    version="1.0.0",
    author="Rank Collapse Lab Team",
    author_email="noreply@example.com",
    description="Simulators, closed-form bounds and oracles for rank collapse in attention and SSM stacks",
    long_description=long_description,
    long_description_content_type="text/markdown",

    # Package configuration
    packages=find_packages(include=["src", "src.*"]),

    # Requirements
    python_requires=">=3.9",
    install_requires=install_requires,
    extras_require=extras_require,

    # Entry points for command-line scripts
    entry_points={
        "console_scripts": [
            "rank-lab=src.core.cli:main",
        ],
    },

    # Classifiers
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],

    keywords="rank collapse attention state-space-models layernorm skip-connections",
)
