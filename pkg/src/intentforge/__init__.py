"""IntentForge — latent goal, obstacle and intent inference from partial trajectories."""

__version__ = "0.1.0"
