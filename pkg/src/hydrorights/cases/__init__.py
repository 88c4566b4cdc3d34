"""Bundled example case files, addressed by bare name through the case loader."""
