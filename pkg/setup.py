#!/usr/bin/env python
# -*- coding: utf-8 -*-

from setuptools import setup, find_packages

requirements = [
    'numpy',
    'scipy',
    'pydantic>=2',
    'joblib',
    'threadpoolctl',
    'tqdm',
]

setup_requirements = [
]

test_requirements = [
    'pytest',
]

extras = {
    'test': test_requirements,
}

packages = find_packages(include=['fermion_steer'])

package_dir = {}

package_data = {}

setup(
    name='fermion-steer',
    version="0.1.0",
    description='Gaussian simulation of adaptive steering protocols for free-fermion Chern insulators',
    classifiers=[
        'License :: OSI Approved :: BSD License',
        'Natural Language :: English',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
    ],
    keywords='fermion-steer free-fermion gaussian chern-insulator monitored-circuits',
    entry_points={
        'console_scripts': [
            'fermion-steer = fermion_steer.cli:main',
        ],
    },
    license="BSD-3-Clause license",
    long_description=open('README.md').read(),
    long_description_content_type='text/markdown',
    include_package_data=True,
    zip_safe=False,
    test_suite='test',
    packages=packages,
    install_requires=requirements,
    package_dir=package_dir,
    package_data=package_data,
    python_requires='>=3.9',
    setup_requires=setup_requirements,
    tests_require=test_requirements,
    extras_require=extras
)
