""" URL mappings for the results API """

from django.urls import (
    path, include
)

from rest_framework.routers import DefaultRouter

from distill import views


router = DefaultRouter()
router.register('runs', views.RunViewSet)
router.register('suites', views.SuiteViewSet)


app_name = 'distill'

urlpatterns = [
    path('', include(router.urls))
]
