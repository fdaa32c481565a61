from setuptools import setup, find_packages

setup(
    name='limo',
    version='0.1.0',
    description='Multi-label ranking and classification with label-wise and instance-wise margins',
    packages=find_packages(),
    python_requires='>=3.8',

    install_requires=[
        'numpy >= 1.17',
        'scipy >= 1.4',
        'scikit-learn',
        'numba',
        'joblib',
        'pandas',
    ],
    extras_require={
        'test': ['pytest', 'hypothesis'],
    },
    entry_points={
        'console_scripts': ['limo=limo._cli:main'],
    },

    license='BSD 3-Clause',
)
