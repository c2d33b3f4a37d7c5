#
from setuptools import find_packages, setup
setup(
    name='superpca',
    packages=find_packages(include=['superpca']),
    version='0.1.0',
    description='Superpixel-wise PCA and multiscale fusion for hyperspectral image classification',
    license='MIT',
    install_requires=['numpy>=1.22', 'scipy>=1.6', 'scikit-learn>=1.0', 'pandas>=1.3', 'reactivex==4.0.*'],
    extras_require={'test': ['pytest', 'pytest-asyncio', 'pytest-mock']},
    entry_points={'console_scripts': ['superpca = superpca.cli:main']},
    python_requires=">=3.9",
    classifiers=[
        "Programming Language :: Python :: 3",
        "Operating System :: OS Independent",
    ],
    long_description_content_type="text/markdown",
    long_description=open('README.md').read()
)
