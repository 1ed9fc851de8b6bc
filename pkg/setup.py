# setup.py
"""
Setup configuration for the AASV toolkit
"""

from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="aasv-toolkit",
    version="1.0.0",
    author="OnePiece Team",
    author_email="team@example.com",
    description="Age agnostic speaker verification on a synthetic adult/child corpus",
    long_description=long_description,
    long_description_content_type="text/markdown",
    url="https://github.com/example/aasv-toolkit",
    packages=find_packages(exclude=["tests", "tests.*"]),
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Topic :: Multimedia :: Sound/Audio :: Speech",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
    ],
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.21.0",
        "scipy>=1.9.0",
        "pandas>=1.5.0",
        "scikit-learn>=1.1.0",
        "jsonschema>=4.17.0",
        "psutil>=5.9.0",
        "tomli>=2.0.0; python_version < '3.11'",
    ],
    extras_require={
        "dev": ["pytest>=7.0.0", "black>=23.0.0", "flake8>=6.0.0"],
    },
    entry_points={
        "console_scripts": [
            "aasv=src.cli.main:main",
        ],
    },
)
