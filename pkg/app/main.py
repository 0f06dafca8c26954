from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from app.api import scenarios, controllers
from app.config.logging_config import setup_logging
from app.config.settings import settings

setup_logging(settings.log_level)

app = FastAPI(
    title="DeePC Converter Control",
    description="Data-enabled predictive control of grid-connected converters: scenario runs and controller presets",
    version="1.0.0"
)

# Add CORS middleware for better compatibility
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],  # In production, replace with specific origins
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Include routers
app.include_router(scenarios.router)
app.include_router(controllers.router)


@app.get("/")
async def root():
    return {"message": "DeePC Converter Control API"}


@app.get("/health")
async def health():
    """Health check endpoint"""
    return {"status": "healthy"}
