"""
Install diffsbt as a development copy by running this file
`python setup.py develop`
"""


from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    LONG_DESCRIPTION = fh.read()

setup(
    name='diffsbt',
    version='0.3.1',
    description='Structure-aware encodings of bug-fix commits, corpus tooling and explanation metrics.',
    long_description=LONG_DESCRIPTION,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=['tests']),
    package_data={'diffsbt': ['data/templates.txt']},
    install_requires=['requests', 'requests_cache', 'pandas', 'numpy',
                      'scipy', 'scikit-learn', 'pydriller', 'GitPython',
                      'unidiff', 'tqdm', 'sacrebleu'],
    entry_points={
        'console_scripts': ['diffsbt = diffsbt.cli:main'],
    },
    python_requires='>=3.8',
    classifiers=[
        'Development Status :: 4 - Beta',
        'Natural Language :: English',
        'Operating System :: OS Independent',
        'Programming Language :: Python :: 3.8',
        'Intended Audience :: Science/Research',
        'Topic :: Software Development :: Quality Assurance',
        'Topic :: Software Development :: Libraries :: Python Modules',
    ]
)
