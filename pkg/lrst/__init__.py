__version__ = "0.1.0"
__author__ = "Kadir Nar"
__license__ = "Apache License 2.0"
__url__ = "https://github.com/kadirnar/lrst"
__summary__ = "LRST: Longitudinal Rank Sum Test for multiple longitudinal endpoints, with a trial simulator."
__library_name__ = "lrst"
