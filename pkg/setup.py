from setuptools import setup

def find_version(path):
    import re
    # path shall be a plain ascii text file.
    s = open(path, 'rt').read()
    version_match = re.search(r"^__version__ = ['\"]([^'\"]*)['\"]",
                              s, re.M)
    if version_match:
        return version_match.group(1)
    raise RuntimeError("Version not found")

setup(
    name="auec", version=find_version("auec/version.py"),
    description="Clustering by autoencoder compression with a spectral gap loss, UMAP and MDBSCAN",
    package_dir = {'auec': 'auec'},
    packages= ['auec', 'auec.tests'],
    package_data = {'auec': ['presets/*.conf']},
    install_requires=['numpy', 'scipy', 'numba', 'mpi4py', 'matplotlib', 'scikit-learn'],
    extras_require={'test': ['pytest', 'runtests']},
    entry_points={'console_scripts': ['auec = auec.cli:main']},
    license='GPL3',
)
