from setuptools import setup

setup(name="tcezsl")
