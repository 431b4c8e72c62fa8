from setuptools import setup, find_packages


NAME = 'latentdg'
DESCRIPTION = ('Domain generalization from a mixture of latent domains, '
               'at desk scale.')
AUTHOR = 'latentdg developers'
VERSION = "0.1"
LICENSE = 'MIT'

install_requires = [
    'numpy',
    'scipy',
    'tqdm',
    'munkres',
    'numba',
    'scikit-learn',
    'Pillow',
    'joblib>=1.3',
]

setup(
    name=NAME,
    version=VERSION,
    description=DESCRIPTION,
    long_description=open('README.md', 'r').read(),
    long_description_content_type='text/markdown',
    author=AUTHOR,
    license=LICENSE,
    install_requires=install_requires,
    extras_require={'test': ['pytest']},
    python_requires='>=3.8',
    entry_points={
        'console_scripts': ['latentdg=latentdg.cli:main'],
    },

    # See https://pypi.python.org/pypi?%3Aaction=list_classifiers
    classifiers=[
        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering :: Artificial Intelligence',
        'License :: OSI Approved :: MIT License',
        'Programming Language :: Python :: 3',
    ],

    keywords='domain generalization, adversarial training, clustering',
    packages=find_packages(exclude=['tests*']),
)
