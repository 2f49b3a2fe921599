"""
GlueSearch - FM-index pattern search with interval gluing
"""

from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="gluesearch",
    version="1.0.0",
    author="GlueSearch Team",
    description="Multiple-pattern and wildcard search over a BWT index by gluing suffix-array intervals",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(include=["gluesearch", "gluesearch.*", "shards", "shards.*"]),
    py_modules=["run"],
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Topic :: Scientific/Engineering :: Bio-Informatics",
        "Topic :: Text Processing :: Indexing",
    ],
    python_requires=">=3.10",
    install_requires=[
        "numpy>=1.24.0",
        "pyyaml>=6.0.0",
        "python-dotenv>=1.0.0",
        "rich>=13.0.0",
    ],
    extras_require={
        "dev": [
            "pytest>=7.4",
            "pytest-asyncio>=0.21",
            "pytest-cov>=4.1",
            "black>=23.0",
        ]
    },
    entry_points={
        "console_scripts": [
            "gluesearch=run:main",
        ]
    },
)
