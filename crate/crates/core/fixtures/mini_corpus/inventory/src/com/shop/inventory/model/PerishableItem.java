package com.shop.inventory.model;

import java.time.LocalDate;

public class PerishableItem extends Item {
    private final LocalDate expiresOn;

    public PerishableItem(String sku, String title, int priceCents, LocalDate expiresOn) {
        super(sku, title, priceCents);
        this.expiresOn = expiresOn;
    }

    public boolean isExpired(LocalDate today) {
        return today.isAfter(expiresOn);
    }
}
