from setuptools import setup, find_packages
import re

VERSIONFILE="chebfem/_version.py"
verstrline = open(VERSIONFILE, "rt").read()
VSRE = r"^__version__ = ['\"]([^'\"]*)['\"]"
mo = re.search(VSRE, verstrline, re.M)
if mo:
    verstr = mo.group(1)
else:
    raise RuntimeError("Unable to find version string in %s." % (VERSIONFILE,))

setup(
	# Application name:
	name="chebfem",

	# Version number (initial):
	version=verstr,

	# Packages
	packages=find_packages(exclude=["tests*", "test*", "examples*"]),

	# Include additional files into the package
	include_package_data=True,
	license="MIT",

	zip_safe = False,
	description="Product-to-sum matrix filling for hierarchical curl-conforming Chebyshev finite elements",

	python_requires='>=3.10',
	install_requires=[
		'numpy>=1.17',
		'scipy>=1.4',
		'prompt-toolkit>=3.0.2',
		'tqdm',
		'colorama',
		'wcwidth',
	],
	extras_require={
		'test': ['pytest'],
	},

	classifiers=[
		"Programming Language :: Python :: 3.10",
		"Operating System :: OS Independent",
	],
	entry_points={
		'console_scripts': [
			'chebfem-client = chebfem.examples.femclient:main',
		],

	}
)
