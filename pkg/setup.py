from setuptools import setup, find_namespace_packages


# Read README.rst file
def readme():
    with open('README.rst') as f:
        return f.read()


with open('requirements.txt') as f:
    requirements = f.read().splitlines()

setup(name='maskgev',
      description='Mask-based GEV beamforming front-end for speech '
                  'enhancement',
      long_description=readme(),
      package_dir={'': 'src'},
      include_package_data=True,
      install_requires=requirements,
      extras_require={'test': ['pytest']},
      python_requires='>=3.7',
      license='Apache 2.0',
      packages=find_namespace_packages(where='src'),
      entry_points={'console_scripts': ['maskgev = maskgev.cli:main']})
