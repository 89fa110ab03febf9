import re
from typing import Optional
from setuptools import setup, find_packages


# Parse the version string out of the init file
version: Optional[str] = None
with open("boothcount/__init__.py", 'r', encoding="utf8") as f:
    match = re.search(r'__version__ = "(\d+\.\d+\.\d+(?:\.dev\d+)?)"', f.read())
    if match:
        version = match.group(1)
if not version:
    raise RuntimeError("Unable to parse version!")

with open("README.md", 'r') as f:
    long_description = f.read()


setup(
    name="boothcount",
    version=version,
    description="Entry and exit people counting for fixed overhead cameras",
    long_description=long_description,
    long_description_content_type="text/markdown; charset=UTF-8; variant=GFM",
    author="DevilXD",
    license='GPLv3',
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Developers",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: GNU General Public License v3 (GPLv3)",
        "Natural Language :: English",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3.8",
        "Topic :: Scientific/Engineering :: Image Recognition",
        "Typing :: Typed",
    ],
    packages=find_packages(include=["boothcount"]),
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.7",
    ],
    python_requires=">=3.8",
    package_data={
        "boothcount": ["py.typed"],
    },
    entry_points={
        "console_scripts": [
            "boothcount=boothcount.cli:entry_point",
        ],
    },
)
