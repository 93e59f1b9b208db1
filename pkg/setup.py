import os
import re

import setuptools


def get_requirements(req_path: str):
    with open(req_path, encoding="utf8") as f:
        return f.read().splitlines()


def get_long_description():
    base_dir = os.path.abspath(os.path.dirname(__file__))
    with open(os.path.join(base_dir, "README.md"), encoding="utf-8") as f:
        return f.read()


def _read_init_field(field: str):
    current_dir = os.path.abspath(os.path.dirname(__file__))
    init_file = os.path.join(current_dir, "lrst", "__init__.py")
    with open(init_file, encoding="utf-8") as f:
        return re.search(rf'^__{field}__ = [\'"]([^\'"]*)[\'"]', f.read(), re.M).group(1)


setuptools.setup(
    name="lrst",
    version=_read_init_field("version"),
    author=_read_init_field("author"),
    author_email="kadir.nar@hotmail.com",
    license=_read_init_field("license"),
    description="LRST: Longitudinal Rank Sum Test for multiple longitudinal endpoints, with a trial simulator.",
    long_description=get_long_description(),
    long_description_content_type="text/markdown",
    url="https://github.com/kadirnar/lrst",
    packages=setuptools.find_packages(exclude=["tests", "examples", "examples.*"]),
    package_data={"lrst": ["configs/*.cfg"]},
    install_requires=get_requirements("requirements.txt"),
    extras_require={"test": ["pytest"]},
    entry_points={"console_scripts": ["lrst=lrst.cli:main"]},
    python_requires=">=3.9",
)
