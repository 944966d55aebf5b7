from setuptools import setup

# read the contents of the README file so that PyPI can use it as the long description
from pathlib import Path
this_directory = Path(__file__).parent
long_description = (this_directory / "README.md").read_text()

modules_list = [
    "pulseforge",
    "pulseforge.util",
    "pulseforge.control",
    "pulseforge.learning",
]

setup(
    name='pulseforge',
    packages=modules_list,  # same as 'name'
    py_modules=modules_list,
    version='0.1.0',
    install_requires=['numpy', 'scipy'],
    extras_require={'test': ['pytest']},
    entry_points={'console_scripts': ['pulseforge=pulseforge.cli:main']},
    description='Noise-corrected pulse sequences and neural-network '
    'surrogates for singlet-triplet qubit gates',
    keywords=['quantum control', 'singlet-triplet', 'composite pulses',
              'dynamically corrected gates', 'neural network'],
    classifiers=[],
    python_requires='>=3.7',
    long_description=long_description,
    long_description_content_type='text/markdown'
)
