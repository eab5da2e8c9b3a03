"""Identification of constant time-headway ACC parameters from car-following data."""
