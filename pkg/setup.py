#!/usr/bin/env python
# -*- coding: utf-8 -*-

from setuptools import setup, find_packages

with open('README.rst') as readme_file:
    readme = readme_file.read()

with open('HISTORY.rst') as history_file:
    history = history_file.read()

requirements = [
    'Click>=7.0',
    'numpy>=1.17',
    'scipy>=1.3',
    'pandas>=1.0',
    'tqdm>=4.28',
    'Mako>=1.0.7',
]

test_requirements = [
    # installed through requirements_dev.txt
]

setup(
    name='memfold',
    version='0.1.0',
    description="Fold sampled memory references of repetitive code regions into one detailed synthetic iteration.",
    long_description=readme + '\n\n' + history,
    author="memfold developers",
    packages=find_packages(exclude=['tests', 'examples', 'examples.*']),
    package_dir={
        'memfold': 'memfold'
    },
    entry_points={
        'console_scripts': [
            'memfold=memfold.cli:cli'
        ]
    },
    include_package_data=True,
    install_requires=requirements,
    python_requires='>=3.8',
    license="GNU General Public License v3",
    zip_safe=False,
    keywords='memfold folding memory sampling performance analysis',
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Developers',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: GNU General Public License v3 or later (GPLv3+)',
        'Natural Language :: English',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Programming Language :: Python :: 3.12'
    ],
    test_suite='tests',
    tests_require=test_requirements
)
