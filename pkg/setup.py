from setuptools import find_namespace_packages, setup

setup(
    name="pie-solver",
    version="0.1.0",
    description="Nystrom solver for partial integral equations with Fredholm alternative diagnostics",
    packages=find_namespace_packages(include=["core", "kernels"]),
    py_modules=["main"],
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.26",
        "pandas>=2.1",
        "scipy>=1.11",
        "joblib>=1.3",
    ],
    extras_require={"test": ["pytest>=7.4", "hypothesis>=6.92"]},
    entry_points={"console_scripts": ["pie=main:main"]},
)
